// App controller: owns the view state, talks to the API client, and
// re-renders into fixed mount points. Refreshing the page rebuilds the
// same view from the API alone; the only local state that survives a
// render is the last successfully fetched data (shown when offline).

import { ApiClient, ApiError, ApiOffline } from "./api";
import {
  type Tab,
  type ViewState,
  clampIndex,
  initialState,
  moveSelection,
  selectTask,
  setFilter,
} from "./state";
import type {
  ArmComparisonDoc,
  DeltaReport,
  Disagreement,
  PromptInfo,
} from "./types";
import {
  renderArms,
  renderDeltaPanel,
  renderDetail,
  renderOfflineBanner,
  renderTriageList,
} from "./views";

interface Cache {
  tasks: string[];
  disagreements: Disagreement[];
  prompts: PromptInfo[];
  delta: DeltaReport | null;
  arms: ArmComparisonDoc | null;
}

export class App {
  state: ViewState = initialState();
  offline = false;
  cache: Cache = {
    tasks: [],
    disagreements: [],
    prompts: [],
    delta: null,
    arms: null,
  };

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async init(): Promise<void> {
    this.root.innerHTML = `
      <div class="banner-slot"></div>
      <header>
        <h1>labelpipe review</h1>
        <select class="task-select"></select>
        <nav>
          <button class="tab" data-tab="triage">Triage</button>
          <button class="tab" data-tab="delta">Prompt delta</button>
          <button class="tab" data-tab="arms">Arms</button>
        </nav>
      </header>
      <div class="filters">
        <select class="status-filter">
          <option value="">all statuses</option>
          <option>open</option>
          <option>prompt-clarified</option>
          <option>gold-suspect</option>
          <option>dismissed</option>
        </select>
        <select class="version-filter"><option value="">all prompt versions</option></select>
      </div>
      <main>
        <section class="list-pane"></section>
        <section class="detail-pane"></section>
      </main>`;
    this.bindEvents();
    await this.guard(async () => {
      this.cache.tasks = await this.api.tasks();
    });
    if (this.cache.tasks.length > 0) {
      await this.showTask(this.cache.tasks[0]);
    } else {
      this.render();
    }
  }

  private bindEvents(): void {
    this.root.addEventListener("click", (ev) => {
      const el = ev.target as HTMLElement;
      if (el.matches(".tab")) {
        void this.showTab(el.dataset.tab as Tab);
      } else if (el.closest(".item")) {
        const item = el.closest(".item") as HTMLElement;
        this.state = {
          ...this.state,
          index: Number(item.dataset.index),
          noteBuffer: "",
        };
        this.render();
      } else if (el.matches(".status-btn")) {
        void this.setStatus(el.dataset.status as string);
      }
    });
    this.root.addEventListener("change", (ev) => {
      const el = ev.target as HTMLElement;
      if (el.matches(".task-select")) {
        void this.showTask((el as HTMLSelectElement).value);
      } else if (el.matches(".status-filter")) {
        void this.applyFilter({
          status: (el as HTMLSelectElement).value || null,
        });
      } else if (el.matches(".version-filter")) {
        const v = (el as HTMLSelectElement).value;
        void this.applyFilter({ promptVersion: v ? Number(v) : null });
      }
    });
    this.root.addEventListener("input", (ev) => {
      const el = ev.target as HTMLElement;
      if (el.matches(".note-input")) {
        // Keep the draft out of render() so typing does not redraw.
        this.state = {
          ...this.state,
          noteBuffer: (el as HTMLInputElement).value,
        };
      }
    });
    this.root.ownerDocument.addEventListener("keydown", (ev) => {
      if (this.state.tab !== "triage") return;
      if ((ev.target as HTMLElement).matches?.("input, select")) return;
      if (ev.key === "j" || ev.key === "ArrowDown") {
        this.state = moveSelection(this.state, 1, this.cache.disagreements.length);
        this.render();
      } else if (ev.key === "k" || ev.key === "ArrowUp") {
        this.state = moveSelection(this.state, -1, this.cache.disagreements.length);
        this.render();
      }
    });
  }

  async showTask(task: string): Promise<void> {
    this.state = selectTask(this.state, task);
    await this.refresh();
  }

  async showTab(tab: Tab): Promise<void> {
    this.state = { ...this.state, tab };
    await this.refresh();
  }

  async applyFilter(filter: Parameters<typeof setFilter>[1]): Promise<void> {
    this.state = setFilter(this.state, filter);
    await this.refresh();
  }

  /** Re-fetch whatever the current tab needs, then render. */
  async refresh(): Promise<void> {
    const task = this.state.task;
    if (task === null) {
      this.render();
      return;
    }
    await this.guard(async () => {
      if (this.state.tab === "triage") {
        const page = await this.api.disagreements(task, {
          status: this.state.filter.status,
          promptVersion: this.state.filter.promptVersion,
        });
        this.cache.disagreements = page.disagreements;
        this.state = {
          ...this.state,
          index: clampIndex(this.state.index, page.disagreements.length),
        };
      } else if (this.state.tab === "delta") {
        this.cache.prompts = await this.api.prompts(task);
        this.cache.delta = await this.loadDelta(task, this.cache.prompts);
      } else {
        this.cache.arms = await this.api.arms(task);
      }
    });
    this.render();
  }

  private async loadDelta(
    task: string,
    prompts: PromptInfo[],
  ): Promise<DeltaReport | null> {
    if (prompts.length < 2) return null;
    const a = prompts[prompts.length - 2].version;
    const b = prompts[prompts.length - 1].version;
    try {
      return await this.api.promptDelta(task, a, b);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return null;
      throw err;
    }
  }

  /** Optimistic update: paint first, reconcile with the POST response. */
  async setStatus(status: string): Promise<void> {
    const task = this.state.task;
    const rec = this.cache.disagreements[this.state.index];
    if (task === null || rec === undefined) return;
    const previous = { status: rec.status, note: rec.note };
    rec.status = status;
    rec.note = this.state.noteBuffer;
    this.render();
    try {
      const event = await this.api.setStatus(
        task,
        rec.sample_id,
        status,
        this.state.noteBuffer,
        "reviewer",
      );
      rec.status = event.status;
      rec.note = event.note;
      this.state = { ...this.state, noteBuffer: "" };
      this.offline = false;
    } catch (err) {
      rec.status = previous.status;
      rec.note = previous.note;
      if (err instanceof ApiOffline) {
        this.offline = true;
      }
    }
    this.render();
  }

  private async guard(fn: () => Promise<void>): Promise<void> {
    try {
      await fn();
      this.offline = false;
    } catch (err) {
      if (err instanceof ApiOffline) {
        this.offline = true;
        return;
      }
      if (err instanceof ApiError && err.status === 404) {
        // Missing artifacts (no runs yet) render as empty states.
        return;
      }
      throw err;
    }
  }

  render(): void {
    const banner = this.root.querySelector(".banner-slot") as HTMLElement;
    banner.innerHTML = renderOfflineBanner(this.offline);

    const select = this.root.querySelector(".task-select") as HTMLSelectElement;
    select.innerHTML = this.cache.tasks
      .map(
        (t) =>
          `<option${t === this.state.task ? " selected" : ""}>${t}</option>`,
      )
      .join("");

    for (const tab of this.root.querySelectorAll<HTMLElement>(".tab")) {
      tab.classList.toggle("active", tab.dataset.tab === this.state.tab);
    }
    const filters = this.root.querySelector(".filters") as HTMLElement;
    filters.style.display = this.state.tab === "triage" ? "" : "none";

    const versions = [
      ...new Set(this.cache.disagreements.map((r) => r.prompt_version)),
    ].sort((a, b) => a - b);
    const versionFilter = this.root.querySelector(
      ".version-filter",
    ) as HTMLSelectElement;
    const current = this.state.filter.promptVersion;
    versionFilter.innerHTML =
      `<option value="">all prompt versions</option>` +
      versions
        .map(
          (v) =>
            `<option value="${v}"${v === current ? " selected" : ""}>v${v}</option>`,
        )
        .join("");

    const list = this.root.querySelector(".list-pane") as HTMLElement;
    const detail = this.root.querySelector(".detail-pane") as HTMLElement;
    if (this.state.tab === "triage") {
      list.innerHTML = renderTriageList(
        this.cache.disagreements,
        this.state.index,
      );
      detail.innerHTML = renderDetail(
        this.cache.disagreements[this.state.index] ?? null,
        this.state.noteBuffer,
      );
    } else if (this.state.tab === "delta") {
      list.innerHTML = renderDeltaPanel(this.cache.delta);
      detail.innerHTML = "";
    } else {
      list.innerHTML = renderArms(this.cache.arms);
      detail.innerHTML = "";
    }
  }
}

export function createApp(root: HTMLElement, api = new ApiClient()): App {
  return new App(root, api);
}
