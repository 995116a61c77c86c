import { beforeEach, describe, expect, it, vi } from "vitest";

import type { TaskPayload } from "../src/types";
import { renderRoundStatus, renderTask } from "../src/view";

const HANDLERS = {
  onApprove: vi.fn(),
  onReject: vi.fn(),
  onToggleEdit: vi.fn(),
  onSubmitCorrection: vi.fn(),
};

function mcTask(): TaskPayload {
  return {
    kind: "task",
    id: "t1",
    batch_id: "b1",
    record_id: "r1",
    round_index: 1,
    reviewer_id: "alice",
    checklist: ["the answer is correct and grounded in the image"],
    presented: {
      image: "f".repeat(64),
      caption: "A caption.",
      instruction: {
        id: "r1",
        domain: "landmark",
        qtype: "multiple_choice",
        question: "Which? Please choose the most appropriate option",
        options: ["a", "b", "c", "d"],
        correct_option: 2,
        answer: "c",
        provenance: "generated",
        review_state: "in_review",
      },
    },
  };
}

function multiRoundTask(): TaskPayload {
  const task = mcTask();
  task.presented.instruction = {
    id: "r2",
    domain: "multi_round_long_vqa",
    qtype: "multi_round",
    question: "q1",
    turns: [
      ["q1", "a1"],
      ["q2", "a2"],
      ["q3", "a3"],
      ["q4", "a4"],
      ["q5", "a5"],
    ],
    provenance: "generated",
    review_state: "in_review",
  };
  return task;
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("task view", () => {
  it("shows image, caption, question, options and checklist", () => {
    const el = renderTask(mcTask(), (id) => `/blobs/${id}`, false, HANDLERS);
    document.body.append(el);
    expect(document.querySelector<HTMLImageElement>(".task-image")?.src).toContain("/blobs/");
    expect(document.querySelector(".task-caption")?.textContent).toBe("A caption.");
    expect(document.querySelectorAll(".option-row")).toHaveLength(4);
    expect(document.querySelector(".option-row.correct")?.textContent).toBe("c");
    expect(document.querySelector(".checklist")?.textContent).toContain("grounded");
  });

  it("edit mode renders four option inputs with a single-select radio group", () => {
    const el = renderTask(mcTask(), (id) => id, true, HANDLERS);
    document.body.append(el);
    const radios = [...document.querySelectorAll<HTMLInputElement>(".edit-correct")];
    expect(radios).toHaveLength(4);
    expect(new Set(radios.map((r) => r.name)).size).toBe(1); // one radio group: exactly-one-correct
    expect(radios.filter((r) => r.checked)).toHaveLength(1);
    expect(document.querySelectorAll(".edit-option")).toHaveLength(4);
  });

  it("multi-round task renders five editable turns", () => {
    const el = renderTask(multiRoundTask(), (id) => id, true, HANDLERS);
    document.body.append(el);
    expect(document.querySelectorAll(".edit-turn-question")).toHaveLength(5);
    expect(document.querySelectorAll(".edit-turn-answer")).toHaveLength(5);
  });

  it("read-only multi-round shows five turns", () => {
    const el = renderTask(multiRoundTask(), (id) => id, false, HANDLERS);
    document.body.append(el);
    expect(document.querySelectorAll(".turn-row")).toHaveLength(5);
  });

  it("wires the approve button", () => {
    const onApprove = vi.fn();
    const el = renderTask(mcTask(), (id) => id, false, { ...HANDLERS, onApprove });
    document.body.append(el);
    document.querySelector<HTMLButtonElement>(".approve")?.click();
    expect(onApprove).toHaveBeenCalledOnce();
  });
});

describe("round status view", () => {
  it("offers advance only when nothing is outstanding", () => {
    const done = renderRoundStatus(
      {
        kind: "round_status",
        batch_id: "b1",
        round_index: 2,
        rounds_completed: 1,
        min_rounds: 3,
        outstanding: 0,
        state: "in_round",
      },
      vi.fn(),
    );
    expect(done.querySelector(".advance")).not.toBeNull();
    const waiting = renderRoundStatus(
      {
        kind: "round_status",
        batch_id: "b1",
        round_index: 2,
        rounds_completed: 1,
        min_rounds: 3,
        outstanding: 2,
        state: "in_round",
      },
      vi.fn(),
    );
    expect(waiting.querySelector(".advance")).toBeNull();
    expect(waiting.querySelector(".waiting")).not.toBeNull();
  });
});
