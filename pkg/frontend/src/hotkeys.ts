// Keyboard layer: every key resolves to the same action objects the mouse
// handlers dispatch, so the two input paths cannot drift apart.

export type VerdictAction =
  | { kind: "ground_truth"; value: boolean }
  | { kind: "natural"; value: boolean }
  | { kind: "assign_class"; index: number }
  | { kind: "assign_expected" }
  | { kind: "assign_predicted" }
  | { kind: "assign_none" }
  | { kind: "submit" }
  | { kind: "next" }
  | { kind: "prev" };

const KEYMAP: Record<string, VerdictAction> = {
  q: { kind: "ground_truth", value: true },
  a: { kind: "ground_truth", value: false },
  w: { kind: "natural", value: true },
  s: { kind: "natural", value: false },
  e: { kind: "assign_expected" },
  d: { kind: "assign_predicted" },
  x: { kind: "assign_none" },
  Enter: { kind: "submit" },
  n: { kind: "next" },
  p: { kind: "prev" },
};

export const actionForKey = (key: string): VerdictAction | null => {
  if (/^[0-9]$/.test(key)) {
    return { kind: "assign_class", index: Number(key) };
  }
  return KEYMAP[key] ?? null;
};

/** Displayed in the help strip; single source for the binding list. */
export const hotkeyHelp: ReadonlyArray<[string, string]> = [
  ["q / a", "class preserved: yes / no"],
  ["w / s", "looks natural: yes / no"],
  ["e", "assign the prompt class"],
  ["d", "assign the predicted class"],
  ["0-9", "assign class by index"],
  ["x", "assign none of the classes"],
  ["Enter", "submit"],
  ["n / p", "next / previous pending"],
];
