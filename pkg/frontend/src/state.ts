// View state and its pure transitions. Nothing in this module touches the
// DOM or the network, so every transition is unit-testable in isolation.

export type Tab = "triage" | "delta" | "arms";

export interface Filter {
  status: string | null;
  promptVersion: number | null;
}

export interface ViewState {
  task: string | null;
  tab: Tab;
  filter: Filter;
  index: number;
  noteBuffer: string;
}

export function initialState(): ViewState {
  return {
    task: null,
    tab: "triage",
    filter: { status: null, promptVersion: null },
    index: 0,
    noteBuffer: "",
  };
}

/** Clamp the selection into [0, n). Returns 0 for an empty list. */
export function clampIndex(index: number, n: number): number {
  if (n <= 0) return 0;
  return Math.min(Math.max(index, 0), n - 1);
}

export function moveSelection(state: ViewState, delta: number, n: number): ViewState {
  const index = clampIndex(state.index + delta, n);
  // Moving to another item discards the unsent note draft.
  return index === state.index ? state : { ...state, index, noteBuffer: "" };
}

export function selectTask(state: ViewState, task: string): ViewState {
  if (task === state.task) return state;
  return {
    ...state,
    task,
    index: 0,
    noteBuffer: "",
    filter: { status: null, promptVersion: null },
  };
}

export function setFilter(state: ViewState, filter: Partial<Filter>): ViewState {
  return {
    ...state,
    filter: { ...state.filter, ...filter },
    index: 0,
    noteBuffer: "",
  };
}

/** Sign-prefixed two-decimal rendering of a server-provided delta. */
export function formatDelta(value: number): string {
  const rounded = Math.abs(value).toFixed(2);
  if (Number(rounded) === 0) return "±0.00";
  return (value > 0 ? "+" : "-") + rounded;
}
