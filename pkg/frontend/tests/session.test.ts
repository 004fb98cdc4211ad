import { describe, expect, it } from "vitest";

import { ReviewApi } from "../src/api.js";
import { actionForKey } from "../src/hotkeys.js";
import { ReviewSession } from "../src/session.js";
import { MockReviewService, smallFixture } from "./mockService.js";

const sessionOver = (mock: MockReviewService, pageSize = 8) => {
  const api = new ReviewApi("", mock.fetchLike());
  return new ReviewSession(api, { reviewer: "me", pageSize });
};

describe("queue loading and pagination", () => {
  it("loads the queue and opens the first pending candidate", async () => {
    const mock = smallFixture();
    const session = sessionOver(mock);
    await session.start();
    expect(session.phase).toBe("ready");
    expect(session.total()).toBe(3);
    expect(session.pendingItems()).toHaveLength(3);
    expect(session.currentId).toBe("circle_000:0");
  });

  it("paginates pending items", async () => {
    const mock = smallFixture();
    const session = sessionOver(mock, 2);
    await session.start();
    expect(session.pageCount()).toBe(2);
    expect(session.visibleItems().map((i) => i.candidate_id)).toEqual([
      "circle_000:0",
      "circle_002:1",
    ]);
    session.nextPage();
    expect(session.visibleItems().map((i) => i.candidate_id)).toEqual([
      "square_001:0",
    ]);
    session.nextPage(); // clamped at the last page
    expect(session.page).toBe(1);
    session.prevPage();
    session.prevPage();
    expect(session.page).toBe(0);
  });

  it("follows the selection across pages", async () => {
    const mock = smallFixture();
    const session = sessionOver(mock, 2);
    await session.start();
    session.open("square_001:0");
    expect(session.page).toBe(1);
  });
});

describe("submission gate", () => {
  it("blocks until all three verdicts are set", async () => {
    const session = sessionOver(smallFixture());
    await session.start();
    expect(session.canSubmit()).toBe(false);
    session.setGroundTruth(true);
    expect(session.canSubmit()).toBe(false);
    session.setNatural(true);
    expect(session.canSubmit()).toBe(false);
    session.assignClass(2);
    expect(session.canSubmit()).toBe(true);
  });

  it("drops nothing on the wire while blocked", async () => {
    const mock = smallFixture();
    const session = sessionOver(mock);
    await session.start();
    session.setNatural(false);
    expect(await session.submit()).toBe(false);
    await session.apply({ kind: "submit" });
    expect(mock.posts).toHaveLength(0);
    // The half-finished draft survives the refused submit.
    expect(session.draft.natural).toBe(false);
  });
});

describe("labeling flow", () => {
  it("posts the payload, reconciles the item, and advances", async () => {
    const mock = smallFixture();
    const session = sessionOver(mock);
    await session.start();
    session.setGroundTruth(true);
    session.setNatural(true);
    session.assignClass(0); // prediction is 1, so this disagrees
    expect(await session.submit()).toBe(true);

    expect(mock.posts).toEqual([
      {
        candidate_id: "circle_000:0",
        reviewer: "me",
        ground_truth_preserved: true,
        natural: true,
        assigned_label: 0,
      },
    ]);
    expect(session.pendingItems()).toHaveLength(2);
    const labeled = session.allItems().find((i) => i.candidate_id === "circle_000:0");
    expect(labeled?.status).toBe("labeled");
    expect(labeled?.resolution.strict_success).toBe(true);
    // Advanced to the next pending item with a clean draft.
    expect(session.currentId).toBe("circle_002:1");
    expect(session.canSubmit()).toBe(false);
  });

  it("renders report numbers straight from the server bytes", async () => {
    const mock = smallFixture();
    const session = sessionOver(mock);
    await session.start();
    session.setGroundTruth(false);
    session.setNatural(true);
    session.assignNone();
    await session.submit();

    const direct = await new ReviewApi("", mock.fetchLike()).reportText();
    expect(session.reportSource()).toBe(direct);
    expect(session.report()?.pending_reviews).toBe(2);
    expect(session.report()?.relaxed_successes).toBe(1);
  });

  it("ignores the expected-class shortcut when the run has no expected class", async () => {
    const mock = new MockReviewService({
      totalRuns: 2,
      candidates: [
        {
          runId: "ood_000",
          className: "unknown",
          expectedClass: null,
          predictedClass: 1,
          step: 0,
        },
      ],
    });
    const session = sessionOver(mock);
    await session.start();
    await session.apply({ kind: "assign_expected" });
    expect(session.draft.assigned.kind).toBe("unset");
    await session.apply({ kind: "assign_predicted" });
    expect(session.draft.assigned).toEqual({ kind: "class", index: 1 });
  });
});

describe("keyboard and mouse parity", () => {
  it("produces byte-identical payloads from either input path", async () => {
    const keyDriven = smallFixture();
    const mouseDriven = smallFixture();
    const a = sessionOver(keyDriven);
    const b = sessionOver(mouseDriven);
    await a.start();
    await b.start();

    for (const key of ["q", "w", "d", "Enter"]) {
      const action = actionForKey(key);
      expect(action).not.toBeNull();
      await a.apply(action!);
    }

    b.setGroundTruth(true);
    b.setNatural(true);
    b.assignPredicted();
    await b.submit();

    expect(keyDriven.posts).toHaveLength(1);
    expect(JSON.stringify(keyDriven.posts)).toBe(JSON.stringify(mouseDriven.posts));
  });
});

describe("failure handling", () => {
  it("rolls back, keeps the draft, and retries a dropped submit", async () => {
    const mock = smallFixture();
    const session = sessionOver(mock);
    await session.start();
    session.setGroundTruth(true);
    session.setNatural(true);
    session.assignClass(3);

    mock.failNext = "reject";
    expect(await session.submit()).toBe(false);
    expect(session.phase).toBe("error");
    expect(session.lastError).toMatch(/unreachable/);
    expect(mock.posts).toHaveLength(0);
    // Optimistic flip rolled back; nothing silently dropped.
    expect(session.pendingItems()).toHaveLength(3);
    expect(session.draft.assigned).toEqual({ kind: "class", index: 3 });

    await session.retry();
    expect(session.phase).toBe("ready");
    expect(mock.posts).toHaveLength(1);
    expect(session.pendingItems()).toHaveLength(2);
  });

  it("surfaces server-side errors with their message", async () => {
    const mock = smallFixture();
    const session = sessionOver(mock);
    await session.start();
    session.setGroundTruth(true);
    session.setNatural(false);
    session.assignNone();
    mock.failNext = "http500";
    await session.submit();
    expect(session.phase).toBe("error");
    expect(session.lastError).toContain("induced failure");
  });

  it("recovers from a failed initial load via retry", async () => {
    const mock = smallFixture();
    mock.failNext = "reject";
    const session = sessionOver(mock);
    await session.start();
    expect(session.phase).toBe("error");
    await session.retry();
    expect(session.phase).toBe("ready");
    expect(session.pendingItems()).toHaveLength(3);
  });
});
