// JSON shapes of the /api/v1/ review service. Field names mirror the
// server's artifacts exactly; nothing here is recomputed client-side.

export const METRIC_NAMES = ["accuracy", "f1", "precision", "recall"] as const;
export type MetricName = (typeof METRIC_NAMES)[number];

export interface Disagreement {
  sample_id: string;
  text: string;
  gold: string;
  llm: string;
  prompt_id: string;
  prompt_version: number;
  status: string;
  note: string;
  consistency?: number;
}

export interface DisagreementPage {
  task: string;
  disagreements: Disagreement[];
  count: number;
}

// MetricsReport.to_json_obj: floats plus server-rounded display strings.
export interface MetricsDoc {
  task_id: string;
  model: string;
  arm: string;
  accuracy: number;
  f1: number;
  precision: number;
  recall: number;
  accuracy_display: string;
  f1_display: string;
  precision_display: string;
  recall_display: string;
  n?: number;
}

export interface DeltaReport {
  task_id: string;
  version_a: number;
  version_b: number;
  before: MetricsDoc;
  after: MetricsDoc;
  deltas: Record<MetricName, number>;
  regressions: string[];
}

export interface ArmMedianRow {
  model: string;
  arm: string;
  accuracy: number;
  f1: number;
  precision: number;
  recall: number;
  accuracy_display: string;
  f1_display: string;
  precision_display: string;
  recall_display: string;
}

export interface ArmComparisonDoc {
  kind: string;
  task_id: string;
  tasks: string[];
  medians: ArmMedianRow[];
  highlights: Record<string, Record<string, string>>;
}

export interface PromptInfo {
  prompt_id: string;
  version: number;
  instructions: string;
  label_lexicon: Record<string, string>;
}

export interface AuditEvent {
  task_id: string;
  sample_id: string;
  status: string;
  note: string;
  actor: string;
  seq: number;
}

export const RESOLUTION_STATUSES = [
  "open",
  "prompt-clarified",
  "gold-suspect",
  "dismissed",
] as const;
