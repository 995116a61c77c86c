// Controller: one active lease per session, keyboard-first verdict flow.
// After every verdict the next task is fetched automatically; no task
// state survives a submission.

import { ApiError, ReviewClient } from "./api";
import type { Correction, RoundStatus, TaskPayload, Verdict } from "./types";
import { correctionDiff, hasChanges, validateCorrection } from "./validation";
import {
  renderAcceptedBanner,
  renderBatchList,
  renderError,
  renderRoundStatus,
  renderTask,
  showValidationErrors,
} from "./view";

type Screen = "batches" | "task" | "round" | "accepted" | "error";

export class ReviewApp {
  private screen: Screen = "batches";
  private batchId: string | null = null;
  private task: TaskPayload | null = null;
  private editing = false;

  constructor(
    private root: HTMLElement,
    private client: ReviewClient,
    private reviewerId: string,
  ) {
    document.addEventListener("keydown", (event) => this.onKey(event));
  }

  async start(): Promise<void> {
    await this.showBatches();
  }

  // ------------------------------------------------------------- screens

  private mount(el: HTMLElement): void {
    this.root.replaceChildren(el);
  }

  async showBatches(): Promise<void> {
    try {
      const batches = await this.client.listBatches();
      this.screen = "batches";
      this.batchId = null;
      this.task = null;
      this.mount(renderBatchList(batches, (id) => void this.pickBatch(id)));
    } catch (err) {
      this.fail(err, () => void this.showBatches());
    }
  }

  async pickBatch(batchId: string): Promise<void> {
    this.batchId = batchId;
    const batch = await this.client.batch(batchId);
    if (batch.state === "accepted") {
      this.screen = "accepted";
      this.mount(renderAcceptedBanner(batch));
      return;
    }
    await this.fetchNext();
  }

  async fetchNext(): Promise<void> {
    if (!this.batchId) return;
    try {
      const result = await this.client.nextTask(this.batchId, this.reviewerId);
      this.editing = false;
      if (result.kind === "task") {
        this.task = result;
        this.screen = "task";
        this.renderTaskScreen();
      } else {
        this.task = null;
        this.screen = "round";
        this.mount(renderRoundStatus(result as RoundStatus, () => void this.advance()));
      }
    } catch (err) {
      this.fail(err, () => void this.fetchNext());
    }
  }

  private renderTaskScreen(): void {
    if (!this.task) return;
    this.mount(
      renderTask(this.task, (id) => this.client.blobUrl(id), this.editing, {
        onApprove: () => void this.verdict("approve"),
        onReject: () => void this.verdict("reject"),
        onToggleEdit: () => this.toggleEdit(),
        onSubmitCorrection: () => void this.submitCorrection(),
      }),
    );
  }

  toggleEdit(): void {
    if (this.screen !== "task") return;
    this.editing = !this.editing;
    this.renderTaskScreen();
  }

  // ------------------------------------------------------------- actions

  async verdict(verdict: Verdict, correction?: Correction): Promise<void> {
    if (!this.task || !this.batchId) return;
    try {
      await this.client.submitVerdict(
        this.task.id,
        this.batchId,
        this.reviewerId,
        verdict,
        correction,
      );
    } catch (err) {
      if (err instanceof ApiError && err.staleLease) {
        // lease expired under us: refresh to whatever the server says
        await this.fetchNext();
        return;
      }
      this.fail(err, () => void this.fetchNext());
      return;
    }
    await this.fetchNext();
  }

  private collectEdits(): (Correction & { question: string }) | null {
    if (!this.task) return null;
    const q = this.root.querySelector<HTMLTextAreaElement>(".edit-question");
    if (!q) return null;
    const edited: Correction & { question: string } = { question: q.value };
    const instruction = this.task.presented.instruction;
    if (instruction.qtype === "multiple_choice") {
      edited.options = [...this.root.querySelectorAll<HTMLInputElement>(".edit-option")].map(
        (el) => el.value,
      );
      const checked = this.root.querySelector<HTMLInputElement>(".edit-correct:checked");
      edited.correct_option = checked ? Number(checked.value) : undefined;
    } else if (instruction.qtype === "multi_round") {
      const questions = [...this.root.querySelectorAll<HTMLInputElement>(".edit-turn-question")];
      const answers = [...this.root.querySelectorAll<HTMLInputElement>(".edit-turn-answer")];
      edited.turns = questions.map((el, i) => [el.value, answers[i]?.value ?? ""]);
    } else {
      const a = this.root.querySelector<HTMLTextAreaElement>(".edit-answer");
      edited.answer = a ? a.value : "";
    }
    return edited;
  }

  async submitCorrection(): Promise<void> {
    if (!this.task) return;
    const edited = this.collectEdits();
    if (!edited) return;
    const instruction = this.task.presented.instruction;
    const errors = validateCorrection(instruction.qtype, edited);
    if (errors.length) {
      showValidationErrors(this.root, errors);
      return;
    }
    const diff = correctionDiff(instruction, edited);
    if (!hasChanges(diff)) {
      showValidationErrors(this.root, ["no changes made; approve instead"]);
      return;
    }
    await this.verdict("correct", diff);
  }

  async advance(): Promise<void> {
    if (!this.batchId) return;
    try {
      const batch = await this.client.advance(this.batchId);
      if (batch.state === "accepted") {
        this.screen = "accepted";
        this.mount(renderAcceptedBanner(batch));
        return;
      }
      await this.fetchNext();
    } catch (err) {
      this.fail(err, () => void this.fetchNext());
    }
  }

  // ------------------------------------------------------------ keyboard

  private onKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    const typing =
      target instanceof HTMLInputElement || target instanceof HTMLTextAreaElement;
    if (this.screen === "task" && !this.editing && !typing) {
      if (event.key === "a") void this.verdict("approve");
      else if (event.key === "x") void this.verdict("reject");
      else if (event.key === "e") this.toggleEdit();
    } else if (this.screen === "task" && this.editing) {
      if (event.key === "Enter" && (event.ctrlKey || event.metaKey)) {
        void this.submitCorrection();
      } else if (event.key === "Escape") {
        this.toggleEdit();
      }
    } else if (this.screen === "round" && event.key === "Enter") {
      void this.advance();
    }
  }

  private fail(err: unknown, retry: () => void): void {
    this.screen = "error";
    const message = err instanceof Error ? err.message : String(err);
    this.mount(renderError(message, retry));
  }
}
