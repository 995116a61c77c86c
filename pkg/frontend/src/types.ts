// Payload shapes of the review service API. Field names mirror the
// server's record types exactly; everything arrives as plain JSON.

export type Verdict = "approve" | "correct" | "reject";

export type QuestionType =
  | "judgment"
  | "multiple_choice"
  | "long_vqa"
  | "short_vqa"
  | "multi_round";

export interface InstructionFields {
  id: string;
  image_id?: string;
  domain: string;
  qtype: QuestionType;
  question: string;
  options?: string[];
  correct_option?: number;
  answer?: string;
  turns?: [string, string][];
  provenance: string;
  review_state: string;
  ancestor_id?: string;
  source_path?: string;
}

export interface Presented {
  instruction: InstructionFields;
  image?: string; // blob content id, served at /blobs/{id}
  image_path?: string; // converted records shipping their own file
  caption?: string;
}

export interface TaskPayload {
  kind: "task";
  id: string;
  batch_id: string;
  record_id: string;
  presented: Presented;
  round_index: number;
  reviewer_id: string;
  checklist: string[];
}

export interface RoundStatus {
  kind: "round_status";
  batch_id: string;
  round_index: number;
  rounds_completed: number;
  min_rounds: number;
  outstanding: number;
  state: string;
}

export interface BatchView {
  id: string;
  domain: string;
  state: string;
  round_index: number;
  rounds_completed: number;
  min_rounds: number;
  task_count: number;
  outstanding: number;
}

export interface Correction {
  question?: string;
  options?: string[];
  correct_option?: number;
  answer?: string;
  turns?: [string, string][];
}

export interface VerdictResult {
  verdict: Verdict;
  record_id: string;
  corrected_record_id?: string;
  round_index: number;
  outstanding: number;
}
