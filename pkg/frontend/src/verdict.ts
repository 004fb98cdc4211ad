import type { LabelPayload } from "./types.js";

// The assigned-label control needs three states: untouched, "shows no known
// class" (submits null), and a concrete class index. A plain number|null
// cannot represent untouched, and submission must stay blocked until the
// reviewer has actually chosen.
export type AssignedChoice =
  | { kind: "unset" }
  | { kind: "none" }
  | { kind: "class"; index: number };

export interface VerdictDraft {
  groundTruthPreserved: boolean | null;
  natural: boolean | null;
  assigned: AssignedChoice;
}

export const emptyDraft = (): VerdictDraft => ({
  groundTruthPreserved: null,
  natural: null,
  assigned: { kind: "unset" },
});

/** All three verdict fields set; the submit gate. */
export const draftComplete = (draft: VerdictDraft): boolean =>
  draft.groundTruthPreserved !== null &&
  draft.natural !== null &&
  draft.assigned.kind !== "unset";

/**
 * The one place a POST /api/labels body is built. Both input paths (clicks
 * and hotkeys) end up here, so their payloads are identical by construction;
 * key order is fixed by this literal.
 */
export const buildLabelPayload = (
  candidateId: string,
  reviewer: string,
  draft: VerdictDraft,
): LabelPayload => {
  if (!draftComplete(draft)) {
    throw new Error("verdict draft incomplete; submission is blocked");
  }
  if (!reviewer) {
    throw new Error("reviewer name required");
  }
  return {
    candidate_id: candidateId,
    reviewer,
    ground_truth_preserved: draft.groundTruthPreserved as boolean,
    natural: draft.natural as boolean,
    assigned_label: draft.assigned.kind === "class" ? draft.assigned.index : null,
  };
};

export const payloadJson = (payload: LabelPayload): string =>
  JSON.stringify(payload);
