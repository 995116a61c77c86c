// DOM construction for every screen. Pure functions: state in, elements
// out; all behaviour is wired through the handler callbacks.

import type { BatchView, InstructionFields, RoundStatus, TaskPayload } from "./types";
import { MC_OPTION_COUNT, MULTI_ROUND_TURNS } from "./validation";

export function h<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const el = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") el.className = value;
    else el.setAttribute(key, value);
  }
  for (const child of children) {
    el.append(child);
  }
  return el;
}

export interface TaskHandlers {
  onApprove: () => void;
  onReject: () => void;
  onToggleEdit: () => void;
  onSubmitCorrection: () => void;
}

export function renderBatchList(
  batches: BatchView[],
  onPick: (batchId: string) => void,
): HTMLElement {
  const rows = batches.map((b) => {
    const row = h("button", { class: "batch-row", "data-batch-id": b.id }, [
      `${b.domain} — ${b.task_count} tasks — round ${b.round_index} — ${b.state}`,
    ]);
    row.addEventListener("click", () => onPick(b.id));
    return row;
  });
  return h("section", { class: "batch-list" }, [
    h("h2", {}, ["Review batches"]),
    ...(rows.length ? rows : [h("p", { class: "empty" }, ["No batches open."])]),
  ]);
}

function renderChecklist(items: string[]): HTMLElement {
  return h("aside", { class: "checklist" }, [
    h("h3", {}, ["Acceptance checklist"]),
    h("ul", {}, items.map((item) => h("li", {}, [item]))),
  ]);
}

function renderReadOnly(instruction: InstructionFields): HTMLElement[] {
  const parts: HTMLElement[] = [
    h("p", { class: "instruction-question" }, [instruction.question]),
  ];
  if (instruction.qtype === "multiple_choice") {
    const options = instruction.options ?? [];
    parts.push(
      h(
        "ol",
        { class: "option-list", type: "A" },
        options.map((opt, i) =>
          h(
            "li",
            {
              class: i === instruction.correct_option ? "option-row correct" : "option-row",
            },
            [opt],
          ),
        ),
      ),
    );
  }
  if (instruction.qtype === "multi_round") {
    const turns = instruction.turns ?? [];
    parts.push(
      h(
        "ol",
        { class: "turn-list" },
        turns.map(([q, a]) =>
          h("li", { class: "turn-row" }, [
            h("p", { class: "turn-question" }, [q]),
            h("p", { class: "turn-answer" }, [a]),
          ]),
        ),
      ),
    );
  } else if (instruction.answer !== undefined) {
    parts.push(h("p", { class: "instruction-answer" }, [instruction.answer]));
  }
  return parts;
}

function renderEditor(instruction: InstructionFields): HTMLElement {
  const form = h("div", { class: "editor" });
  form.append(
    h("label", {}, ["Question"]),
    h("textarea", { class: "edit-question", rows: "2" }, [instruction.question]),
  );
  if (instruction.qtype === "multiple_choice") {
    const options = instruction.options ?? [];
    const list = h("div", { class: "edit-options" });
    for (let i = 0; i < MC_OPTION_COUNT; i++) {
      const radio = h("input", {
        type: "radio",
        name: "correct-option",
        class: "edit-correct",
        value: String(i),
      }) as HTMLInputElement;
      radio.checked = i === instruction.correct_option;
      const text = h("input", {
        type: "text",
        class: "edit-option",
        value: options[i] ?? "",
      });
      list.append(h("div", { class: "edit-option-row" }, [radio, text]));
    }
    form.append(h("label", {}, ["Options (pick the single correct one)"]), list);
  } else if (instruction.qtype === "multi_round") {
    const list = h("div", { class: "edit-turns" });
    const turns = instruction.turns ?? [];
    for (let i = 0; i < MULTI_ROUND_TURNS; i++) {
      const [q, a] = turns[i] ?? ["", ""];
      list.append(
        h("div", { class: "edit-turn-row" }, [
          h("input", { type: "text", class: "edit-turn-question", value: q }),
          h("input", { type: "text", class: "edit-turn-answer", value: a }),
        ]),
      );
    }
    form.append(h("label", {}, ["Five linked turns"]), list);
  } else {
    form.append(
      h("label", {}, ["Answer"]),
      h("textarea", { class: "edit-answer", rows: "2" }, [instruction.answer ?? ""]),
    );
  }
  form.append(h("ul", { class: "validation-errors" }));
  return form;
}

export function renderTask(
  task: TaskPayload,
  blobUrl: (contentId: string) => string,
  editing: boolean,
  handlers: TaskHandlers,
): HTMLElement {
  const instruction = task.presented.instruction;
  const view = h("section", {
    class: "task-view",
    "data-task-id": task.id,
    "data-record-id": task.record_id,
    "data-round": String(task.round_index),
  });

  const media = h("div", { class: "task-media" });
  if (task.presented.image) {
    media.append(
      h("img", { class: "task-image", src: blobUrl(task.presented.image), alt: "task image" }),
    );
  } else if (task.presented.image_path) {
    media.append(h("p", { class: "task-image-path" }, [task.presented.image_path]));
  }
  if (task.presented.caption) {
    media.append(h("blockquote", { class: "task-caption" }, [task.presented.caption]));
  }
  view.append(media);

  const body = h("div", { class: "task-body" }, [
    h("p", { class: "task-meta" }, [
      `${instruction.domain} · ${instruction.qtype} · round ${task.round_index} · ${instruction.provenance}`,
    ]),
    ...(editing ? [renderEditor(instruction)] : renderReadOnly(instruction)),
  ]);
  view.append(body, renderChecklist(task.checklist));

  const approve = h("button", { class: "approve" }, ["Approve (a)"]);
  approve.addEventListener("click", handlers.onApprove);
  const edit = h("button", { class: "edit" }, [editing ? "Cancel edit (e)" : "Edit (e)"]);
  edit.addEventListener("click", handlers.onToggleEdit);
  const reject = h("button", { class: "reject" }, ["Reject (x)"]);
  reject.addEventListener("click", handlers.onReject);
  const actions = h("div", { class: "actions" }, [approve, edit, reject]);
  if (editing) {
    const submit = h("button", { class: "submit-correction" }, ["Submit correction (enter)"]);
    submit.addEventListener("click", handlers.onSubmitCorrection);
    actions.append(submit);
  }
  view.append(actions);
  return view;
}

export function renderRoundStatus(status: RoundStatus, onAdvance: () => void): HTMLElement {
  const section = h("section", { class: "round-status" }, [
    h("h2", {}, [`Round ${status.round_index} — ${status.outstanding} tasks outstanding`]),
    h("p", { class: "round-progress" }, [
      `rounds completed: ${status.rounds_completed} / ${status.min_rounds} minimum`,
    ]),
  ]);
  if (status.outstanding === 0) {
    const advance = h("button", { class: "advance" }, ["Close round (enter)"]);
    advance.addEventListener("click", onAdvance);
    section.append(advance);
  } else {
    section.append(
      h("p", { class: "waiting" }, ["Other reviewers hold the remaining leases; refresh shortly."]),
    );
  }
  return section;
}

export function renderAcceptedBanner(batch: BatchView): HTMLElement {
  return h("section", { class: "accepted-banner" }, [
    h("h2", {}, ["Batch accepted"]),
    h("p", {}, [
      `${batch.task_count} records accepted after ${batch.rounds_completed} rounds.`,
    ]),
  ]);
}

export function renderError(message: string, onRetry: () => void): HTMLElement {
  const retry = h("button", { class: "retry" }, ["Retry"]);
  retry.addEventListener("click", onRetry);
  return h("section", { class: "error-view" }, [
    h("p", { class: "error-message" }, [message]),
    retry,
  ]);
}

export function showValidationErrors(root: HTMLElement, errors: string[]): void {
  const list = root.querySelector(".validation-errors");
  if (!list) return;
  list.replaceChildren(...errors.map((e) => h("li", {}, [e])));
}
