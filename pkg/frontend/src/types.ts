/**
 * Payload shapes of the /v1 session API, mirrored field for field.
 *
 * The UI performs no inference of its own: everything it shows comes out
 * of these payloads verbatim. `display` is opaque server-side content and
 * is typed loosely on purpose.
 */

export type SessionState =
  | "initializing"
  | "fitting"
  | "awaiting-choice"
  | "ready"
  | "done";

export interface DisplayPayload {
  label?: string;
  text?: string;
  image_url?: string;
  [key: string]: unknown;
}

export interface QueryOption {
  id: number;
  coords: number[];
  display: DisplayPayload;
}

export interface QueryPayload {
  query_seq: number;
  ids: number[];
  options: QueryOption[];
  requested_size: number;
}

export interface HistoryEntry {
  set: number[];
  chosen: number[];
}

export interface MetricsRow {
  iteration: number;
  log_hv_diff: number | null;
  n_pareto: number | null;
  acquisition_max: number | null;
  wall_time_s: number | null;
}

export interface StatePayload {
  id: string;
  state: SessionState;
  problem: string | null;
  bounds: number[][];
  n_e: number;
  auto_ne: boolean;
  budget: number;
  iteration: number;
  query_seq: number;
  pending_query: number[] | null;
  init_queries_left: number;
  options: number[][];
  history: HistoryEntry[];
  latent_means: number[][] | null;
  metrics: MetricsRow[];
  flags: string[];
  error: string | null;
  created_at: string;
  updated_at: string;
}

export interface ParetoPayload {
  ids: number[];
  probs: number[];
  indices: number[];
  threshold: number;
}

export interface CreateResponse {
  id: string;
  state: SessionState;
  query: QueryPayload;
}

export interface ChoiceAck {
  id: string;
  state: SessionState;
  iteration: number;
  query_seq: number;
}

export interface CreateBody {
  id?: string;
  bounds?: number[][];
  problem?: string;
  n_e?: number | "auto";
  ne_max?: number;
  budget?: number;
  seed: number;
  n_init?: number;
  n_init_queries?: number;
  fit?: Record<string, unknown>;
  acq?: Record<string, unknown>;
}
