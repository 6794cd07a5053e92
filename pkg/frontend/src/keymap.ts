// Keyboard surface: every workflow action has a key, so a mouse is
// never required.
//
//   arrows      move between messages (down/right = next, up/left = back)
//   [  ]        previous / next match
//   1 .. 8      cycle one label attribute (ATTRIBUTES order)
//   s           save the current message's labels
//   c           resolve the current message's unknowns
//
// Keys pressed with a modifier held, or while an input element has
// focus, are left for the browser.

import { ATTRIBUTES, Attribute } from "./labels.js";

export type NavDirection = "prev_message" | "next_message" | "prev_match" | "next_match";

export type Action =
  | { kind: "navigate"; dir: NavDirection }
  | { kind: "toggle"; attr: Attribute }
  | { kind: "save" }
  | { kind: "clear" };

/** The slice of KeyboardEvent the mapping needs; tests pass plain objects. */
export interface KeyStroke {
  key: string;
  altKey?: boolean;
  ctrlKey?: boolean;
  metaKey?: boolean;
}

const IGNORED_TAGS = new Set(["INPUT", "TEXTAREA", "SELECT"]);

export function shouldIgnore(event: KeyboardEvent): boolean {
  const target = event.target as HTMLElement | null;
  return target !== null && (IGNORED_TAGS.has(target.tagName) || target.isContentEditable);
}

export function actionForKey(stroke: KeyStroke): Action | null {
  if (stroke.altKey || stroke.ctrlKey || stroke.metaKey) {
    return null;
  }
  switch (stroke.key) {
    case "ArrowDown":
    case "ArrowRight":
      return { kind: "navigate", dir: "next_message" };
    case "ArrowUp":
    case "ArrowLeft":
      return { kind: "navigate", dir: "prev_message" };
    case "[":
      return { kind: "navigate", dir: "prev_match" };
    case "]":
      return { kind: "navigate", dir: "next_match" };
  }
  if (stroke.key.length !== 1) {
    return null;
  }
  const key = stroke.key.toLowerCase();
  if (key === "s") {
    return { kind: "save" };
  }
  if (key === "c") {
    return { kind: "clear" };
  }
  if (key >= "1" && key <= "8") {
    return { kind: "toggle", attr: ATTRIBUTES[Number(key) - 1] };
  }
  return null;
}
