// End-to-end: the real review service (spawned Python process, mock
// store) driven through the real DOM. One 5-task batch goes through a
// correction and three full rounds to acceptance.

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ReviewClient } from "../src/api";
import { ReviewApp } from "../src/app";
import { startSeededService, type ServiceHandle } from "./service";

let service: ServiceHandle;
let client: ReviewClient;
let app: ReviewApp;
let root: HTMLElement;

function query<T extends Element>(selector: string): T | null {
  return document.querySelector<T>(selector);
}

async function waitFor<T>(probe: () => T | null | undefined | false, what: string, timeoutMs = 10_000): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const value = probe();
    if (value) return value;
    await new Promise((r) => setTimeout(r, 25));
  }
  throw new Error(`timed out waiting for ${what}`);
}

function key(k: string, init: KeyboardEventInit = {}): void {
  document.dispatchEvent(new KeyboardEvent("keydown", { key: k, bubbles: true, ...init }));
}

function currentTask(): { taskId: string; recordId: string } | null {
  const el = query<HTMLElement>(".task-view");
  if (!el) return null;
  return {
    taskId: el.getAttribute("data-task-id")!,
    recordId: el.getAttribute("data-record-id")!,
  };
}

async function waitForNewTaskOrStatus(previousTaskId: string | null): Promise<"task" | "status"> {
  await waitFor(() => {
    const status = query(".round-status");
    if (status) return true;
    const task = currentTask();
    return task !== null && task.taskId !== previousTaskId;
  }, "next task or round status");
  return query(".round-status") ? "status" : "task";
}

beforeAll(async () => {
  service = await startSeededService();
  client = new ReviewClient(service.baseUrl);
  await client.openBatch("landmark", service.recordIds, 3, 7);

  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
  app = new ReviewApp(root, client, "annotator-e2e");
  await app.start();
});

afterAll(() => {
  service?.stop();
});

describe("one full correction workflow in the browser", () => {
  const served: Record<number, string[]> = { 1: [], 2: [], 3: [] };
  let correctedTaskId = "";
  let originalRecordId = "";

  it("lists the open batch and enters it", async () => {
    const row = await waitFor(
      () => query<HTMLButtonElement>(".batch-row"),
      "the batch row",
    );
    expect(row.textContent).toContain("landmark");
    expect(row.textContent).toContain("5 tasks");
    row.click();
    await waitFor(() => query(".task-view"), "the first task");
  });

  it("round 1 serves all five tasks exactly once, with one correction round trip", async () => {
    for (let i = 0; i < 5; i++) {
      const task = currentTask()!;
      expect(task).not.toBeNull();
      served[1].push(task.taskId);

      // the rendered triple: image, caption, instruction
      expect(query<HTMLImageElement>(".task-image")?.src).toContain("/blobs/");
      expect(query(".task-caption")?.textContent?.length).toBeGreaterThan(20);
      expect(query(".instruction-question")?.textContent).toContain("Please answer briefly");

      if (i === 1) {
        // correct this one through the editor
        correctedTaskId = task.taskId;
        originalRecordId = task.recordId;
        key("e");
        const answerBox = await waitFor(
          () => query<HTMLTextAreaElement>(".edit-answer"),
          "the answer editor",
        );
        answerBox.value = "corrected by annotator";
        query<HTMLButtonElement>(".submit-correction")!.click();
      } else {
        key("a"); // keyboard approve
      }
      await waitForNewTaskOrStatus(task.taskId);
    }
    expect(new Set(served[1]).size).toBe(5); // all served exactly once
    expect(query(".round-status")).not.toBeNull();
    expect(query(".accepted-banner")).toBeNull();
  });

  it("closing round 1 opens round 2 with a different order and the corrected record", async () => {
    expect(query(".round-status")!.textContent).toContain("0 tasks outstanding");
    key("Enter"); // close round
    await waitFor(() => currentTask(), "round 2 first task");

    for (let i = 0; i < 5; i++) {
      const task = currentTask()!;
      served[2].push(task.taskId);
      if (task.taskId === correctedTaskId) {
        // the correction round trip re-renders the corrected record
        expect(task.recordId).not.toBe(originalRecordId);
        expect(query(".instruction-answer")?.textContent).toBe("corrected by annotator");
      }
      key("a");
      await waitForNewTaskOrStatus(task.taskId);
    }
    expect(new Set(served[2]).size).toBe(5);
    expect(served[2]).not.toEqual(served[1]); // re-shuffled order
    expect(served[2].slice().sort()).toEqual(served[1].slice().sort());
    expect(served[2]).toContain(correctedTaskId);
    expect(query(".accepted-banner")).toBeNull();
  });

  it("round 3 is clean but the batch still needs it before acceptance", async () => {
    key("Enter"); // close round 2 (rounds_completed becomes 2; still no banner)
    await waitFor(() => currentTask(), "round 3 first task");
    expect(query(".accepted-banner")).toBeNull();

    let previous: string | null = null;
    for (let i = 0; i < 5; i++) {
      const task = currentTask()!;
      served[3].push(task.taskId);
      key("a");
      previous = task.taskId;
      await waitForNewTaskOrStatus(previous);
    }
    expect(new Set(served[3]).size).toBe(5);
    expect(query(".accepted-banner")).toBeNull(); // not before the round closes
  });

  it("the accepted banner appears only after round 3 closes", async () => {
    key("Enter"); // close round 3: three completed rounds, final pass clean
    const banner = await waitFor(() => query(".accepted-banner"), "the accepted banner");
    expect(banner.textContent).toContain("accepted");
    expect(banner.textContent).toContain("3 rounds");

    const batches = await client.listBatches();
    expect(batches[0].state).toBe("accepted");
    expect(batches[0].rounds_completed).toBe(3);

    // server-side: 4 approved originals + 1 corrected record accepted
    const accepted = await client.records({ review_state: "accepted" });
    expect(accepted).toHaveLength(5);
    const answers = accepted.map((r) => r.answer);
    expect(answers).toContain("corrected by annotator");
  });

  it("client-side validation blocks an empty correction", async () => {
    // fresh store state is already accepted; validate purely in the DOM
    const { validateCorrection } = await import("../src/validation");
    expect(
      validateCorrection("short_vqa", { question: "q?", answer: "" }).length,
    ).toBeGreaterThan(0);
  });
});
