import { describe, expect, it } from "vitest";

import { ATTRIBUTES } from "../src/labels.js";
import { actionForKey } from "../src/keymap.js";

describe("actionForKey", () => {
  it("maps arrows to message navigation", () => {
    expect(actionForKey({ key: "ArrowDown" })).toEqual({
      kind: "navigate",
      dir: "next_message",
    });
    expect(actionForKey({ key: "ArrowRight" })).toEqual({
      kind: "navigate",
      dir: "next_message",
    });
    expect(actionForKey({ key: "ArrowUp" })).toEqual({
      kind: "navigate",
      dir: "prev_message",
    });
    expect(actionForKey({ key: "ArrowLeft" })).toEqual({
      kind: "navigate",
      dir: "prev_message",
    });
  });

  it("maps brackets to match navigation", () => {
    expect(actionForKey({ key: "[" })).toEqual({ kind: "navigate", dir: "prev_match" });
    expect(actionForKey({ key: "]" })).toEqual({ kind: "navigate", dir: "next_match" });
  });

  it("maps digits 1..8 to the attributes in display order", () => {
    for (let digit = 1; digit <= 8; digit++) {
      expect(actionForKey({ key: String(digit) })).toEqual({
        kind: "toggle",
        attr: ATTRIBUTES[digit - 1],
      });
    }
  });

  it("maps s/c in either case to save/clear", () => {
    expect(actionForKey({ key: "s" })).toEqual({ kind: "save" });
    expect(actionForKey({ key: "S" })).toEqual({ kind: "save" });
    expect(actionForKey({ key: "c" })).toEqual({ kind: "clear" });
    expect(actionForKey({ key: "C" })).toEqual({ kind: "clear" });
  });

  it("ignores unmapped keys", () => {
    for (const key of ["9", "0", "x", "Enter", "Escape", "F5", " "]) {
      expect(actionForKey({ key })).toBe(null);
    }
  });

  it("ignores chords with a modifier held", () => {
    expect(actionForKey({ key: "s", ctrlKey: true })).toBe(null);
    expect(actionForKey({ key: "ArrowDown", altKey: true })).toBe(null);
    expect(actionForKey({ key: "1", metaKey: true })).toBe(null);
  });
});
