import type { ReviewSession } from "./session.js";
import type { QueueItem } from "./types.js";

export interface AppElements {
  queueStatus: HTMLElement;
  queueList: HTMLElement;
  pageLabel: HTMLElement;
  prevPage: HTMLButtonElement;
  nextPage: HTMLButtonElement;
  errorBanner: HTMLElement;
  errorMessage: HTMLElement;
  retryButton: HTMLButtonElement;
  candidateMeta: HTMLElement;
  initImage: HTMLImageElement;
  initCaption: HTMLElement;
  candidateImage: HTMLImageElement;
  candidateCaption: HTMLElement;
  gtpYes: HTMLButtonElement;
  gtpNo: HTMLButtonElement;
  naturalYes: HTMLButtonElement;
  naturalNo: HTMLButtonElement;
  classButtons: HTMLElement;
  assignNone: HTMLButtonElement;
  submitButton: HTMLButtonElement;
  reviewerInput: HTMLInputElement;
  hotkeyHelp: HTMLElement;
  reportValues: HTMLElement;
  reportRaw: HTMLElement;
}

/** class_index -> class_name, recovered from the queue itself. */
export const classNamesFromQueue = (items: QueueItem[]): Map<number, string> => {
  const names = new Map<number, string>();
  for (const item of items) {
    if (item.expected_class !== null) {
      names.set(item.expected_class, item.class_name);
    }
  }
  return names;
};

const className = (names: Map<number, string>, index: number | null): string => {
  if (index === null) {
    return "none";
  }
  return names.get(index) ?? `#${index}`;
};

const setPressed = (button: HTMLButtonElement, on: boolean): void => {
  button.classList.toggle("active", on);
  button.setAttribute("aria-pressed", on ? "true" : "false");
};

export const renderQueue = (els: AppElements, session: ReviewSession): void => {
  const pending = session.pendingItems();
  els.queueStatus.textContent = `${pending.length} pending of ${session.total()}`;
  els.pageLabel.textContent = `page ${session.page + 1} / ${session.pageCount()}`;
  els.queueList.textContent = "";
  const doc = els.queueList.ownerDocument;
  for (const item of session.visibleItems()) {
    const li = doc.createElement("li");
    li.dataset.candidateId = item.candidate_id;
    li.textContent = `${item.candidate_id} (${item.class_name})`;
    if (item.candidate_id === session.currentId) {
      li.classList.add("current");
    }
    els.queueList.appendChild(li);
  }
};

export const renderCandidate = (els: AppElements, session: ReviewSession,
                                baseUrl: string): void => {
  const item = session.current();
  const names = classNamesFromQueue(session.allItems());
  if (!item) {
    els.candidateMeta.textContent = session.pendingItems().length === 0
      ? "queue clear, nothing pending"
      : "select a candidate";
    els.initImage.removeAttribute("src");
    els.candidateImage.removeAttribute("src");
  } else {
    els.candidateMeta.textContent =
      `${item.run_id} step ${item.step}; prompt class ` +
      `${className(names, item.expected_class)}, classifier now says ` +
      `${className(names, item.predicted_class)}`;
    els.initImage.src = baseUrl + item.init_image;
    els.candidateImage.src = baseUrl + item.candidate_image;
    els.initCaption.textContent = "initialization (step 0)";
    els.candidateCaption.textContent = `candidate (step ${item.step})`;
  }

  const draft = session.draft;
  setPressed(els.gtpYes, draft.groundTruthPreserved === true);
  setPressed(els.gtpNo, draft.groundTruthPreserved === false);
  setPressed(els.naturalYes, draft.natural === true);
  setPressed(els.naturalNo, draft.natural === false);
  setPressed(els.assignNone, draft.assigned.kind === "none");

  els.classButtons.textContent = "";
  const doc = els.classButtons.ownerDocument;
  for (const [index, name] of [...names.entries()].sort((a, b) => a[0] - b[0])) {
    const button = doc.createElement("button");
    button.type = "button";
    button.dataset.classIndex = String(index);
    button.textContent = `${name} (${index})`;
    setPressed(button,
               draft.assigned.kind === "class" && draft.assigned.index === index);
    els.classButtons.appendChild(button);
  }

  els.submitButton.disabled = !session.canSubmit();
};

export const renderReport = (els: AppElements, session: ReviewSession): void => {
  const source = session.reportSource();
  // The pre shows the exact server bytes; the list pulls fields out of the
  // parsed copy of those same bytes. No rate is derived here.
  els.reportRaw.textContent = source ?? "";
  els.reportValues.textContent = "";
  if (source === null) {
    return;
  }
  const report = session.report();
  if (report === null) {
    return;
  }
  const doc = els.reportValues.ownerDocument;
  const rows: Array<[string, unknown]> = [
    ["runs", report.total_runs],
    ["fooled", report.fooled_runs],
    ["fooling rate", report.fooling_rate],
    ["pending reviews", report.pending_reviews],
    ["strict rate", report.strict_rate],
    ["relaxed rate", report.relaxed_rate],
  ];
  for (const [label, value] of rows) {
    const dt = doc.createElement("dt");
    dt.textContent = label;
    const dd = doc.createElement("dd");
    dd.textContent = value === null ? "awaiting labels" : String(value);
    els.reportValues.appendChild(dt);
    els.reportValues.appendChild(dd);
  }
};

export const renderError = (els: AppElements, session: ReviewSession): void => {
  const failed = session.phase === "error";
  els.errorBanner.hidden = !failed;
  els.errorMessage.textContent = failed ? (session.lastError ?? "request failed") : "";
};

export const renderAll = (els: AppElements, session: ReviewSession,
                          baseUrl: string): void => {
  renderQueue(els, session);
  renderCandidate(els, session, baseUrl);
  renderReport(els, session);
  renderError(els, session);
};
