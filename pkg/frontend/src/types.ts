// Mirrors of the review-service JSON payloads. The service is the source of
// truth; nothing here is computed client-side.

export type Tri = boolean | null;

export interface CandidateResolution {
  label_count: number;
  ground_truth_preserved: Tri;
  natural: Tri;
  // assigned_label alone cannot distinguish "no majority yet" from a
  // resolved majority of null, hence the separate flag.
  assigned_label_resolved: boolean;
  assigned_label: number | null;
  strict_success: Tri;
  relaxed_success: Tri;
}

export interface QueueItem {
  candidate_id: string;
  run_id: string;
  class_name: string;
  step: number;
  decides_run: boolean;
  expected_class: number | null;
  predicted_class: number;
  init_image: string;
  candidate_image: string;
  status: "pending" | "labeled";
  resolution: CandidateResolution;
}

export interface QueueResponse {
  schema_version: number;
  total: number;
  items: QueueItem[];
}

export interface LabelRecord {
  candidate_id: string;
  reviewer: string;
  ground_truth_preserved: boolean;
  natural: boolean;
  assigned_label: number | null;
  timestamp: string;
}

export interface CandidateDetail extends QueueItem {
  schema_version: number;
  labels: LabelRecord[];
}

// Body for POST /api/labels. The server stamps the submission time, so no
// timestamp is sent from the browser.
export interface LabelPayload {
  candidate_id: string;
  reviewer: string;
  ground_truth_preserved: boolean;
  natural: boolean;
  assigned_label: number | null;
}

export interface SubmitResponse {
  schema_version: number;
  candidate: CandidateDetail;
  report: ReportPayload;
}

export interface PerClassReport {
  runs: number;
  fooled: number;
  failed: number;
  pending: number;
  strict_successes: number;
  relaxed_successes: number;
}

export interface ReportPayload {
  schema_version: number;
  backend: string;
  variable_choice: string;
  total_runs: number;
  fooled_runs: number;
  fooling_rate: number;
  mean_first_adversarial_step: number | null;
  failed_runs: number;
  pending_reviews: number;
  strict_successes: number;
  relaxed_successes: number;
  strict_rate: number | null;
  relaxed_rate: number | null;
  per_class: Record<string, PerClassReport>;
}
