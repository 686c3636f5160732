/** Wire types for the control service. The console renders these verbatim
 * and never derives numbers of its own. */

export interface BaseModelInfo {
  name: string;
  kind: "base";
  order: number;
  smoothing: string;
  context_window: number;
}

export interface AttributeModelInfo {
  name: string;
  kind: "attribute";
  order: number;
  smoothing: string;
  context_window: number;
  direction: "toward-positive" | "toward-negative";
  scorer_hash: string;
}

export type ModelInfo = BaseModelInfo | AttributeModelInfo;

export interface ModelsResponse {
  models: ModelInfo[];
  presets: Record<string, Record<string, number>>;
}

export interface GenerateRequest {
  prompt: string;
  model: string;
  weights: Record<string, number>;
  seed?: number;
  num_samples?: number;
}

export interface Candidate {
  text: string;
  tokens: number[];
  terminated_by: string;
  mean_posteriors: Record<string, number>;
  attribute_scores: Record<string, number>;
}

export interface GenerateResponse {
  model: string;
  prompt: string;
  weights: Record<string, number>;
  seed: number;
  num_samples: number;
  candidates: Candidate[];
  session_id: string;
}

export interface ScoreResponse {
  text: string;
  attribute_scores: Record<string, number>;
}

export interface SessionRecord {
  format_version: number;
  seq: number;
  session_id: string;
  kind: string;
  request: Record<string, unknown>;
  response: Record<string, unknown>;
  digests: string[];
}
