import { ReviewApi } from "./api.js";
import type { VerdictAction } from "./hotkeys.js";
import type { LabelPayload, QueueItem, ReportPayload } from "./types.js";
import {
  VerdictDraft,
  buildLabelPayload,
  draftComplete,
  emptyDraft,
} from "./verdict.js";

export type Phase = "idle" | "loading" | "ready" | "submitting" | "error";

type Listener = () => void;

export interface SessionOptions {
  reviewer?: string;
  pageSize?: number;
}

/**
 * Single-user review session over the service API.
 *
 * Holds the queue, the selected candidate, the in-progress verdict draft and
 * the raw report body. Submissions are optimistic: the item flips to labeled
 * locally, then reconciles with the candidate view the server returns; on
 * failure the flip is rolled back and the draft survives so nothing typed is
 * lost. All rates come from the server verbatim.
 */
export class ReviewSession {
  phase: Phase = "idle";
  lastError: string | null = null;
  reviewer: string;
  page = 0;
  readonly pageSize: number;
  currentId: string | null = null;
  draft: VerdictDraft = emptyDraft();

  private items: QueueItem[] = [];
  private queueTotal = 0;
  private reportBody: string | null = null;
  private failedSubmit: LabelPayload | null = null;
  private listeners: Listener[] = [];

  constructor(private readonly api: ReviewApi, options: SessionOptions = {}) {
    this.reviewer = options.reviewer ?? "reviewer";
    this.pageSize = options.pageSize ?? 8;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((fn) => fn !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  // ------------------------------------------------------------- loading

  async start(): Promise<void> {
    this.phase = "loading";
    this.emit();
    try {
      await this.refreshQueue();
      await this.refreshReport();
    } catch (err) {
      this.fail(err);
      return;
    }
    this.phase = "ready";
    this.openFirstPending();
    this.emit();
  }

  async refreshQueue(): Promise<void> {
    const response = await this.api.queue();
    this.items = response.items;
    this.queueTotal = response.total;
    this.emit();
  }

  async refreshReport(): Promise<void> {
    this.reportBody = await this.api.reportText();
    this.emit();
  }

  private fail(err: unknown): void {
    this.phase = "error";
    this.lastError = err instanceof Error ? err.message : String(err);
    this.emit();
  }

  /** Re-run whatever failed last: a submit if one is parked, else a reload. */
  async retry(): Promise<void> {
    this.lastError = null;
    if (this.failedSubmit !== null) {
      const payload = this.failedSubmit;
      this.failedSubmit = null;
      this.phase = "ready";
      await this.submitPayload(payload);
      return;
    }
    await this.start();
  }

  // ------------------------------------------------------------ queue view

  allItems(): QueueItem[] {
    return this.items;
  }

  total(): number {
    return this.queueTotal;
  }

  pendingItems(): QueueItem[] {
    return this.items.filter((item) => item.status === "pending");
  }

  pageCount(): number {
    return Math.max(1, Math.ceil(this.pendingItems().length / this.pageSize));
  }

  visibleItems(): QueueItem[] {
    const start = this.page * this.pageSize;
    return this.pendingItems().slice(start, start + this.pageSize);
  }

  nextPage(): void {
    this.page = Math.min(this.page + 1, this.pageCount() - 1);
    this.emit();
  }

  prevPage(): void {
    this.page = Math.max(this.page - 1, 0);
    this.emit();
  }

  // ------------------------------------------------------------ selection

  current(): QueueItem | null {
    if (this.currentId === null) {
      return null;
    }
    return this.items.find((i) => i.candidate_id === this.currentId) ?? null;
  }

  open(candidateId: string): void {
    const item = this.items.find((i) => i.candidate_id === candidateId);
    if (!item) {
      return;
    }
    this.currentId = candidateId;
    this.draft = emptyDraft();
    const index = this.pendingItems().findIndex(
      (i) => i.candidate_id === candidateId,
    );
    if (index >= 0) {
      this.page = Math.floor(index / this.pageSize);
    }
    this.emit();
  }

  openFirstPending(): void {
    const pending = this.pendingItems();
    if (pending.length > 0) {
      this.open(pending[0].candidate_id);
    } else {
      this.currentId = null;
      this.emit();
    }
  }

  openRelative(direction: 1 | -1): void {
    const pending = this.pendingItems();
    if (pending.length === 0) {
      return;
    }
    const index = pending.findIndex((i) => i.candidate_id === this.currentId);
    const next = index < 0 ? 0 : (index + direction + pending.length) % pending.length;
    this.open(pending[next].candidate_id);
  }

  // -------------------------------------------------------------- verdicts

  setGroundTruth(value: boolean): void {
    this.draft = { ...this.draft, groundTruthPreserved: value };
    this.emit();
  }

  setNatural(value: boolean): void {
    this.draft = { ...this.draft, natural: value };
    this.emit();
  }

  assignClass(index: number): void {
    this.draft = { ...this.draft, assigned: { kind: "class", index } };
    this.emit();
  }

  assignNone(): void {
    this.draft = { ...this.draft, assigned: { kind: "none" } };
    this.emit();
  }

  assignExpected(): void {
    const item = this.current();
    if (item && item.expected_class !== null) {
      this.assignClass(item.expected_class);
    }
  }

  assignPredicted(): void {
    const item = this.current();
    if (item) {
      this.assignClass(item.predicted_class);
    }
  }

  canSubmit(): boolean {
    return (
      (this.phase === "ready" || this.phase === "error") &&
      this.currentId !== null &&
      draftComplete(this.draft)
    );
  }

  // ------------------------------------------------------------ submission

  /** Returns false when blocked by the incomplete-draft gate. */
  async submit(): Promise<boolean> {
    if (!this.canSubmit() || this.currentId === null) {
      return false;
    }
    const payload = buildLabelPayload(this.currentId, this.reviewer, this.draft);
    await this.submitPayload(payload);
    return this.phase !== "error";
  }

  private async submitPayload(payload: LabelPayload): Promise<void> {
    const index = this.items.findIndex(
      (i) => i.candidate_id === payload.candidate_id,
    );
    const before = index >= 0 ? this.items[index] : null;
    if (before) {
      // Optimistic flip; reconciled or rolled back below.
      this.items[index] = { ...before, status: "labeled" };
    }
    this.phase = "submitting";
    this.emit();

    let response;
    try {
      response = await this.api.submitLabel(payload);
      await this.refreshReport();
    } catch (err) {
      if (before && index >= 0) {
        this.items[index] = before;
      }
      this.failedSubmit = payload;
      this.fail(err);
      return;
    }

    if (index >= 0) {
      const { labels, ...item } = response.candidate;
      void labels;
      this.items[index] = item as QueueItem;
    }
    this.failedSubmit = null;
    this.phase = "ready";
    this.openFirstPending();
  }

  // ---------------------------------------------------------------- report

  /** Exact text of the last GET /api/report; the only rendering source. */
  reportSource(): string | null {
    return this.reportBody;
  }

  report(): ReportPayload | null {
    return this.reportBody === null
      ? null
      : (JSON.parse(this.reportBody) as ReportPayload);
  }

  // ---------------------------------------------------------------- input

  /** Entry point for the keyboard path; mouse handlers call setters directly. */
  async apply(action: VerdictAction): Promise<void> {
    switch (action.kind) {
      case "ground_truth":
        this.setGroundTruth(action.value);
        return;
      case "natural":
        this.setNatural(action.value);
        return;
      case "assign_class":
        this.assignClass(action.index);
        return;
      case "assign_expected":
        this.assignExpected();
        return;
      case "assign_predicted":
        this.assignPredicted();
        return;
      case "assign_none":
        this.assignNone();
        return;
      case "submit":
        await this.submit();
        return;
      case "next":
        this.openRelative(1);
        return;
      case "prev":
        this.openRelative(-1);
        return;
    }
  }
}
