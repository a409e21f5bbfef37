/** Session state machine, kept free of DOM concerns so it unit-tests alone.
 *
 * Invariants: submit is possible only with a helpfulness option selected
 * (acceptability stays optional), and each loaded task carries one client
 * token so repeated submits of the same judgment stay idempotent.
 */

import {
  AnnotationTask,
  ApiClient,
  Helpfulness,
  QueueStats,
  SubmitResult,
} from "./api.js";

export const HELPFULNESS_LABELS: Record<Helpfulness, string> = {
  a_better: "A is better",
  b_better: "B is better",
  both_good: "both A and B are good",
  both_bad: "both A and B are not good",
};

export const HELPFULNESS_ORDER: Helpfulness[] = [
  "a_better",
  "b_better",
  "both_good",
  "both_bad",
];

export const ACCEPTABILITY_LABELS = {
  a_acceptable: "A is acceptable",
  a_unacceptable: "A is unacceptable",
  b_acceptable: "B is acceptable",
  b_unacceptable: "B is unacceptable",
} as const;

export type Screen = "login" | "loading" | "task" | "empty";

export interface UiState {
  screen: Screen;
  annotatorId: string | null;
  task: AnnotationTask | null;
  helpfulness: Helpfulness | null;
  acceptA: boolean | null;
  acceptB: boolean | null;
  stats: QueueStats | null;
  errorBanner: string | null;
  notice: string | null;
  submitting: boolean;
  submittedCount: number;
}

export type TokenSource = () => string;

const defaultTokenSource: TokenSource = () =>
  `tok-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;

export class AnnotationSession {
  state: UiState = {
    screen: "login",
    annotatorId: null,
    task: null,
    helpfulness: null,
    acceptA: null,
    acceptB: null,
    stats: null,
    errorBanner: null,
    notice: null,
    submitting: false,
    submittedCount: 0,
  };

  private clientToken: string | null = null;
  private listeners: Array<(state: UiState) => void> = [];

  constructor(
    private readonly api: ApiClient,
    private readonly newToken: TokenSource = defaultTokenSource,
  ) {}

  subscribe(listener: (state: UiState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  async login(annotatorId: string): Promise<void> {
    const trimmed = annotatorId.trim();
    if (!trimmed) {
      this.state.errorBanner = "annotator id must not be empty";
      this.emit();
      return;
    }
    this.state.annotatorId = trimmed;
    await this.loadNext();
  }

  /** Fetch the next open task; a network failure keeps the current state
   * and raises the retry banner instead. */
  async loadNext(): Promise<void> {
    if (!this.state.annotatorId) return;
    const previous = this.state.screen;
    this.state.screen = "loading";
    this.state.errorBanner = null;
    this.emit();
    try {
      const [task, stats] = await Promise.all([
        this.api.nextTask(this.state.annotatorId),
        this.api.stats().catch(() => this.state.stats),
      ]);
      this.state.stats = stats ?? null;
      this.state.task = task;
      this.state.helpfulness = null;
      this.state.acceptA = null;
      this.state.acceptB = null;
      this.clientToken = task ? this.newToken() : null;
      this.state.screen = task ? "task" : "empty";
    } catch (err) {
      // retry banner; previous task (if any) stays on screen
      this.state.screen = previous === "loading" ? "empty" : previous;
      this.state.errorBanner = `service unreachable: ${String(err)}`;
    }
    this.emit();
  }

  selectHelpfulness(value: Helpfulness): void {
    if (this.state.screen !== "task") return;
    this.state.helpfulness = value;
    this.emit();
  }

  selectHelpfulnessByIndex(index: number): void {
    const value = HELPFULNESS_ORDER[index];
    if (value) this.selectHelpfulness(value);
  }

  setAcceptability(which: "a" | "b", value: boolean | null): void {
    if (this.state.screen !== "task") return;
    if (which === "a") this.state.acceptA = value;
    else this.state.acceptB = value;
    this.emit();
  }

  canSubmit(): boolean {
    return (
      this.state.screen === "task" &&
      this.state.task !== null &&
      this.state.helpfulness !== null &&
      !this.state.submitting
    );
  }

  async submit(): Promise<void> {
    if (!this.canSubmit()) return;
    const task = this.state.task!;
    const token = this.clientToken!;
    this.state.submitting = true;
    this.state.notice = null;
    this.emit();
    let result: SubmitResult;
    try {
      result = await this.api.submitJudgment(task.task_id, {
        helpfulness: this.state.helpfulness!,
        accept_a: this.state.acceptA,
        accept_b: this.state.acceptB,
        annotator_id: this.state.annotatorId!,
        client_token: token,
      });
    } catch (err) {
      this.state.submitting = false;
      this.state.errorBanner = `submit failed: ${String(err)}`;
      this.emit();
      return;
    }
    this.state.submitting = false;
    if (result.kind === "ok") {
      this.state.submittedCount += 1;
      await this.loadNext();
      return;
    }
    if (result.kind === "conflict") {
      this.state.notice = "task was already judged elsewhere; loading the next one";
      await this.loadNext();
      return;
    }
    this.state.errorBanner = result.message;
    this.emit();
  }
}
