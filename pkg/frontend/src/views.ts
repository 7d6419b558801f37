// HTML renderers. Each takes API payloads and returns markup; event wiring
// lives in main.ts. Metric values are shown via the server's *_display
// strings verbatim; only signed deltas get display formatting here.

import { formatDelta } from "./state";
import {
  type ArmComparisonDoc,
  type DeltaReport,
  type Disagreement,
  METRIC_NAMES,
  RESOLUTION_STATUSES,
} from "./types";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderTriageList(
  records: Disagreement[],
  selected: number,
): string {
  if (records.length === 0) {
    return `<p class="empty">No disagreements match the current filter.</p>`;
  }
  const items = records
    .map((rec, i) => {
      const cls = i === selected ? "item selected" : "item";
      return (
        `<li class="${cls}" data-index="${i}" data-id="${escapeHtml(rec.sample_id)}">` +
        `<span class="sample-id">${escapeHtml(rec.sample_id)}</span>` +
        `<span class="status status-${escapeHtml(rec.status)}">${escapeHtml(rec.status)}</span>` +
        `</li>`
      );
    })
    .join("");
  return `<ul class="triage-list">${items}</ul>`;
}

export function renderDetail(rec: Disagreement | null, noteBuffer: string): string {
  if (rec === null) {
    return `<p class="empty">Select a disagreement.</p>`;
  }
  const consistency =
    rec.consistency === undefined
      ? ""
      : `<div class="row"><span class="key">consistency</span>` +
        `<span class="consistency">${rec.consistency.toFixed(2)}</span></div>`;
  const buttons = RESOLUTION_STATUSES.map(
    (s) =>
      `<button class="status-btn${s === rec.status ? " active" : ""}" data-status="${s}">${s}</button>`,
  ).join("");
  return (
    `<div class="detail" data-id="${escapeHtml(rec.sample_id)}">` +
    `<h3>${escapeHtml(rec.sample_id)}</h3>` +
    `<blockquote class="text">${escapeHtml(rec.text)}</blockquote>` +
    `<div class="row"><span class="key">gold</span>` +
    `<span class="label gold">${escapeHtml(rec.gold)}</span></div>` +
    `<div class="row"><span class="key">llm</span>` +
    `<span class="label llm">${escapeHtml(rec.llm)}</span></div>` +
    consistency +
    `<div class="row"><span class="key">prompt</span>` +
    `<span>${escapeHtml(rec.prompt_id)} v${rec.prompt_version}</span></div>` +
    (rec.note ? `<div class="row"><span class="key">note</span><span>${escapeHtml(rec.note)}</span></div>` : "") +
    `<div class="status-buttons">${buttons}</div>` +
    `<input class="note-input" placeholder="note (sent with next status)" value="${escapeHtml(noteBuffer)}">` +
    `</div>`
  );
}

export function renderDeltaPanel(report: DeltaReport | null): string {
  if (report === null) {
    return (
      `<p class="empty">No delta report. A comparison needs two validated ` +
      `prompt versions for this task.</p>`
    );
  }
  const rows = METRIC_NAMES.map((m) => {
    const delta = report.deltas[m];
    const regressed = report.regressions.includes(m);
    const badgeCls = regressed
      ? "delta regression"
      : delta > 0
        ? "delta gain"
        : "delta zero";
    return (
      `<tr data-metric="${m}">` +
      `<th>${m}</th>` +
      `<td>${report.before[`${m}_display`]}</td>` +
      `<td>${report.after[`${m}_display`]}</td>` +
      `<td><span class="${badgeCls}">${formatDelta(delta)}</span></td>` +
      `</tr>`
    );
  }).join("");
  const caption =
    `prompt v${report.version_a} &rarr; v${report.version_b}` +
    (report.regressions.length
      ? `, regression in ${report.regressions.join(", ")}`
      : "");
  return (
    `<table class="delta-table"><caption>${caption}</caption>` +
    `<thead><tr><th></th><th>before</th><th>after</th><th>&Delta;</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderArms(doc: ArmComparisonDoc | null): string {
  if (doc === null) {
    return `<p class="empty">No arm comparison has been run for this task.</p>`;
  }
  const head = METRIC_NAMES.map((m) => `<th>${m}</th>`).join("");
  const rows = doc.medians
    .map((row) => {
      const cells = METRIC_NAMES.map((m) => {
        const best = doc.highlights[row.model]?.[m] === row.arm;
        return `<td class="${best ? "best" : ""}">${row[`${m}_display`]}</td>`;
      }).join("");
      return (
        `<tr data-model="${escapeHtml(row.model)}" data-arm="${escapeHtml(row.arm)}">` +
        `<th>${escapeHtml(row.model)}</th><th>${escapeHtml(row.arm)}</th>${cells}</tr>`
      );
    })
    .join("");
  return (
    `<table class="arms-table">` +
    `<caption>median over ${doc.tasks.length} tasks; best arm per model in bold</caption>` +
    `<thead><tr><th>model</th><th>arm</th>${head}</tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderOfflineBanner(visible: boolean): string {
  if (!visible) return "";
  return (
    `<div class="offline-banner" role="alert">Service unreachable; ` +
    `showing the last loaded data, read-only.</div>`
  );
}
