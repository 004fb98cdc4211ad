import { ReviewApi } from "./api.js";
import { actionForKey, hotkeyHelp } from "./hotkeys.js";
import { AppElements, renderAll } from "./render.js";
import { ReviewSession } from "./session.js";

const getElements = (doc: Document): AppElements => {
  const get = <T extends HTMLElement>(id: string): T => {
    const el = doc.getElementById(id);
    if (!el) {
      throw new Error(`missing element #${id}`);
    }
    return el as T;
  };
  return {
    queueStatus: get("queue-status"),
    queueList: get("queue-list"),
    pageLabel: get("page-label"),
    prevPage: get<HTMLButtonElement>("prev-page"),
    nextPage: get<HTMLButtonElement>("next-page"),
    errorBanner: get("error-banner"),
    errorMessage: get("error-message"),
    retryButton: get<HTMLButtonElement>("retry-button"),
    candidateMeta: get("candidate-meta"),
    initImage: get<HTMLImageElement>("init-image"),
    initCaption: get("init-caption"),
    candidateImage: get<HTMLImageElement>("candidate-image"),
    candidateCaption: get("candidate-caption"),
    gtpYes: get<HTMLButtonElement>("gtp-yes"),
    gtpNo: get<HTMLButtonElement>("gtp-no"),
    naturalYes: get<HTMLButtonElement>("natural-yes"),
    naturalNo: get<HTMLButtonElement>("natural-no"),
    classButtons: get("class-buttons"),
    assignNone: get<HTMLButtonElement>("assign-none"),
    submitButton: get<HTMLButtonElement>("submit-button"),
    reviewerInput: get<HTMLInputElement>("reviewer-input"),
    hotkeyHelp: get("hotkey-help"),
    reportValues: get("report-values"),
    reportRaw: get("report-raw"),
  };
};

/**
 * Wire the page to a session and start it. Returns the session so tests can
 * drive and inspect the exact object behind the DOM.
 */
export const initApp = (doc: Document, api: ReviewApi): ReviewSession => {
  const els = getElements(doc);
  const session = new ReviewSession(api, {
    reviewer: els.reviewerInput.value || "reviewer",
  });

  els.reviewerInput.addEventListener("input", () => {
    session.reviewer = els.reviewerInput.value || "reviewer";
  });

  // Mouse path: plain click handlers calling the session setters.
  els.gtpYes.addEventListener("click", () => session.setGroundTruth(true));
  els.gtpNo.addEventListener("click", () => session.setGroundTruth(false));
  els.naturalYes.addEventListener("click", () => session.setNatural(true));
  els.naturalNo.addEventListener("click", () => session.setNatural(false));
  els.assignNone.addEventListener("click", () => session.assignNone());
  els.classButtons.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const index = target.dataset?.classIndex;
    if (index !== undefined) {
      session.assignClass(Number(index));
    }
  });
  els.queueList.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest?.("li");
    const id = target?.dataset?.candidateId;
    if (id) {
      session.open(id);
    }
  });
  els.prevPage.addEventListener("click", () => session.prevPage());
  els.nextPage.addEventListener("click", () => session.nextPage());
  els.retryButton.addEventListener("click", () => void session.retry());
  const form = els.submitButton.closest("form");
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    void session.submit();
  });
  els.submitButton.addEventListener("click", (event) => {
    event.preventDefault();
    void session.submit();
  });

  // Keyboard path: keys resolve to the same actions the handlers above use.
  doc.addEventListener("keydown", (event) => {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      return;
    }
    const action = actionForKey(event.key);
    if (action) {
      event.preventDefault();
      void session.apply(action);
    }
  });

  els.hotkeyHelp.textContent = hotkeyHelp
    .map(([key, what]) => `${key}: ${what}`)
    .join("  |  ");

  session.subscribe(() => renderAll(els, session, api.baseUrl));
  void session.start();
  return session;
};
