// Tri-state label domain shared by every other module.
//
// A label value is true, false, or null (= unknown / not yet decided).
// The eight attributes and their order are fixed by the annotation API;
// the order also assigns the 1..8 toggle keys.

export type TriState = boolean | null;

export const ATTRIBUTES = [
  "is_abusive",
  "is_positive",
  "is_negative",
  "has_bad_language",
  "is_racist",
  "noob_related",
  "specific_target",
  "filtered_text",
] as const;

export type Attribute = (typeof ATTRIBUTES)[number];

export type LabelMap = Record<Attribute, TriState>;

/** Human-readable control captions, indexed like ATTRIBUTES. */
export const ATTRIBUTE_CAPTIONS: Record<Attribute, string> = {
  is_abusive: "abusive",
  is_positive: "positive",
  is_negative: "negative",
  has_bad_language: "bad language",
  is_racist: "racist",
  noob_related: "noob-related",
  specific_target: "specific target",
  filtered_text: "filtered text",
};

export function emptyLabels(): LabelMap {
  const labels = {} as LabelMap;
  for (const attr of ATTRIBUTES) {
    labels[attr] = null;
  }
  return labels;
}

/** One step of the toggle cycle: unknown -> true -> false -> unknown. */
export function cycle(value: TriState): TriState {
  if (value === null) return true;
  if (value === true) return false;
  return null;
}

/**
 * Cycle one attribute and keep the positive/negative controls mutually
 * exclusive: turning either one true forces the other to false.
 * Returns a new map; the input is not mutated.
 */
export function applyToggle(labels: LabelMap, attr: Attribute): LabelMap {
  const next: LabelMap = { ...labels };
  next[attr] = cycle(next[attr]);
  if (next[attr] === true) {
    if (attr === "is_positive") next.is_negative = false;
    if (attr === "is_negative") next.is_positive = false;
  }
  return next;
}

/** Manual decisions win; automatic prefill fills the gaps. */
export function mergedLabels(auto: LabelMap, manual: LabelMap): LabelMap {
  const merged = {} as LabelMap;
  for (const attr of ATTRIBUTES) {
    merged[attr] = manual[attr] !== null ? manual[attr] : auto[attr];
  }
  return merged;
}

export function labelsEqual(a: LabelMap, b: LabelMap): boolean {
  return ATTRIBUTES.every((attr) => a[attr] === b[attr]);
}

/** True when no attribute is left unknown. */
export function allResolved(labels: LabelMap): boolean {
  return ATTRIBUTES.every((attr) => labels[attr] !== null);
}

/** Parse a labels object from an API payload, tolerating missing keys. */
export function labelsFrom(raw: Record<string, unknown>): LabelMap {
  const labels = emptyLabels();
  for (const attr of ATTRIBUTES) {
    const value = raw[attr];
    if (value === true || value === false) {
      labels[attr] = value;
    }
  }
  return labels;
}
