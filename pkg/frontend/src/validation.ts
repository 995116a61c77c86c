// Client-side validation of correction edits. This is a strict subset of
// the server's record validation: everything rejected here would also be
// rejected server-side, and the server remains the authority.

import type { Correction, InstructionFields, QuestionType } from "./types";

export const MC_OPTION_COUNT = 4;
export const MULTI_ROUND_TURNS = 5;

export function validateCorrection(
  qtype: QuestionType,
  edited: Required<Pick<Correction, "question">> & Correction,
): string[] {
  const errors: string[] = [];
  if (!edited.question.trim()) {
    errors.push("question must not be empty");
  }
  if (qtype === "multiple_choice") {
    const options = edited.options ?? [];
    if (options.length !== MC_OPTION_COUNT) {
      errors.push(`exactly ${MC_OPTION_COUNT} options are required`);
    }
    if (options.some((o) => !o.trim())) {
      errors.push("options must not be empty");
    }
    if (new Set(options.map((o) => o.trim())).size !== options.length) {
      errors.push("options must be pairwise distinct");
    }
    const correct = edited.correct_option;
    if (correct === undefined || correct < 0 || correct >= MC_OPTION_COUNT) {
      errors.push("exactly one option must be marked correct");
    }
  } else if (qtype === "multi_round") {
    const turns = edited.turns ?? [];
    if (turns.length !== MULTI_ROUND_TURNS) {
      errors.push(`exactly ${MULTI_ROUND_TURNS} turns are required`);
    }
    if (turns.some(([q, a]) => !q.trim() || !a.trim())) {
      errors.push("every turn needs a question and an answer");
    }
  } else {
    if (!(edited.answer ?? "").trim()) {
      errors.push("answer must not be empty");
    }
    if (qtype === "judgment") {
      const normalized = (edited.answer ?? "").trim().toLowerCase().replace(/[.!]$/, "");
      if (!["yes", "no", "true", "false"].includes(normalized)) {
        errors.push("judgment answers must be yes or no");
      }
    }
  }
  return errors;
}

// Build the correction payload: only fields that actually changed.
export function correctionDiff(
  original: InstructionFields,
  edited: Required<Pick<Correction, "question">> & Correction,
): Correction {
  const diff: Correction = {};
  if (edited.question !== original.question) diff.question = edited.question;
  if (
    edited.options &&
    JSON.stringify(edited.options) !== JSON.stringify(original.options ?? [])
  ) {
    diff.options = edited.options;
  }
  if (
    edited.correct_option !== undefined &&
    edited.correct_option !== original.correct_option
  ) {
    diff.correct_option = edited.correct_option;
  }
  if (edited.answer !== undefined && edited.answer !== (original.answer ?? "")) {
    diff.answer = edited.answer;
  }
  if (
    edited.turns &&
    JSON.stringify(edited.turns) !== JSON.stringify(original.turns ?? [])
  ) {
    diff.turns = edited.turns;
  }
  return diff;
}

export function hasChanges(diff: Correction): boolean {
  return Object.keys(diff).length > 0;
}
