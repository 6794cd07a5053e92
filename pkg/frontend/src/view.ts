// DOM rendering: one pure pass from store state to elements.
//
// The whole view is rebuilt on every state change — the data is a few
// hundred nodes at most, and full rebuilds keep rendering an honest
// function of state.  All content goes in via textContent; chat text is
// untrusted and must never reach innerHTML.

import { MatchSummary, Message } from "./api.js";
import { ATTRIBUTES, ATTRIBUTE_CAPTIONS, LabelMap, TriState, mergedLabels } from "./labels.js";
import { AnnotationStore } from "./store.js";

export interface ViewHandlers {
  onFilterChange(on: boolean): void;
  onSelectMatch(matchId: string): void;
  onSelectMessage(messageId: string): void;
  onToggle(attr: (typeof ATTRIBUTES)[number]): void;
  onSave(): void;
  onClear(): void;
}

export interface ViewOptions {
  /** Show raw message/match identifiers (off unless ?debug=1). */
  debug: boolean;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

function formatClock(seconds: number): string {
  const total = Math.max(0, Math.floor(seconds));
  const minutes = Math.floor(total / 60);
  const rest = total % 60;
  return `${minutes}:${String(rest).padStart(2, "0")}`;
}

function stateName(value: TriState): string {
  if (value === true) return "true";
  if (value === false) return "false";
  return "unknown";
}

function stateGlyph(value: TriState): string {
  if (value === true) return "✓";
  if (value === false) return "✗";
  return "–";
}

// ------------------------------------------------------------- sections

function renderTopbar(
  store: AnnotationStore,
  handlers: ViewHandlers,
): HTMLElement {
  const bar = el("header", "topbar");
  bar.appendChild(el("h1", "", "chat annotator"));

  const filter = el("label", "filter-toggle");
  const box = el("input");
  box.type = "checkbox";
  box.checked = store.onlyUnclassified;
  box.addEventListener("change", () => handlers.onFilterChange(box.checked));
  filter.appendChild(box);
  filter.appendChild(el("span", "", "unclassified only"));
  bar.appendChild(filter);

  const open = store.matches.filter((m) => !m.classified).length;
  bar.appendChild(
    el("span", "topbar-counts", `${store.matches.length} matches · ${open} open`),
  );
  if (store.busy) {
    bar.appendChild(el("span", "busy-dot", "…"));
  }
  return bar;
}

function renderMatchList(
  store: AnnotationStore,
  handlers: ViewHandlers,
  options: ViewOptions,
): HTMLElement {
  const aside = el("aside", "matches");
  aside.appendChild(el("h2", "", "matches"));
  const list = el("ul", "match-list");
  for (const { match, index } of store.visibleMatches()) {
    const item = el("li", "match");
    if (index === store.matchIndex) {
      item.classList.add("selected");
    }
    if (match.classified) {
      item.classList.add("classified");
    }
    item.appendChild(el("div", "match-title", `Match ${index + 1}`));
    const labeled = match.message_count - match.unclassified_messages;
    item.appendChild(
      el("div", "match-sub", `${labeled}/${match.message_count} labeled`),
    );
    if (options.debug) {
      item.appendChild(el("div", "debug-id", `${match.match_id} · ${match.source_id}`));
    }
    item.addEventListener("click", () => handlers.onSelectMatch(match.match_id));
    list.appendChild(item);
  }
  if (list.childElementCount === 0) {
    list.appendChild(el("li", "empty", "no matches"));
  }
  aside.appendChild(list);
  return aside;
}

function renderMessageItem(
  message: Message,
  selected: boolean,
  handlers: ViewHandlers,
  options: ViewOptions,
): HTMLElement {
  const item = el("li", "message");
  if (selected) {
    item.classList.add("selected");
    item.setAttribute("aria-current", "true");
  }
  const merged = mergedLabels(message.auto_labels, message.manual_labels);
  const unresolved = ATTRIBUTES.some((attr) => merged[attr] === null);
  if (unresolved) {
    item.classList.add("unresolved");
  }

  const head = el("div", "message-head");
  head.appendChild(el("span", "message-clock", formatClock(message.clock)));
  head.appendChild(el("span", "message-author", message.author_name || "(unknown player)"));
  head.appendChild(el("span", "message-cs", `cs ${message.cs}`));
  if (options.debug) {
    head.appendChild(el("span", "debug-id", `${message.message_id} v${message.version}`));
  }
  item.appendChild(head);
  item.appendChild(el("div", "message-text", message.text));
  item.addEventListener("click", () => handlers.onSelectMessage(message.message_id));
  return item;
}

function renderMessages(
  store: AnnotationStore,
  handlers: ViewHandlers,
  options: ViewOptions,
): HTMLElement {
  const main = el("main", "messages");
  const match = store.selectedMatch;
  if (match === null) {
    main.appendChild(el("div", "empty", "nothing loaded — harvest some replays first"));
    return main;
  }
  const list = el("ol", "message-list");
  store.messages.forEach((message, index) => {
    list.appendChild(
      renderMessageItem(message, index === store.messageIndex, handlers, options),
    );
  });
  if (store.messages.length === 0) {
    main.appendChild(el("div", "empty", "this match has no chat"));
  }
  main.appendChild(list);
  return main;
}

function draftOrigin(
  attr: (typeof ATTRIBUTES)[number],
  draft: LabelMap,
  message: Message,
): string {
  const merged = mergedLabels(message.auto_labels, message.manual_labels);
  if (draft[attr] !== merged[attr]) {
    return "edited";
  }
  if (message.manual_labels[attr] !== null) {
    return "manual";
  }
  if (message.auto_labels[attr] !== null) {
    return "auto";
  }
  return "";
}

function renderPanel(
  store: AnnotationStore,
  handlers: ViewHandlers,
  options: ViewOptions,
): HTMLElement {
  const panel = el("section", "panel");
  const message = store.selectedMessage;
  if (message === null) {
    panel.appendChild(el("div", "empty", "no message selected"));
    return panel;
  }

  const meta = el("div", "panel-meta");
  meta.appendChild(el("div", "panel-author", message.author_name || "(unknown player)"));
  meta.appendChild(el("div", "panel-clock", `at ${formatClock(message.clock)}`));
  meta.appendChild(el("div", "panel-scores", `cs ${message.cs} · pcs ${message.pcs}`));
  if (options.debug) {
    meta.appendChild(el("div", "debug-id", `${message.message_id} v${message.version}`));
  }
  panel.appendChild(meta);
  panel.appendChild(el("div", "panel-text", message.text));

  const rows = el("div", "label-rows");
  ATTRIBUTES.forEach((attr, index) => {
    const row = el("div", "label-row");
    row.appendChild(el("kbd", "", String(index + 1)));
    row.appendChild(el("span", "label-name", ATTRIBUTE_CAPTIONS[attr]));
    const value = store.draft[attr];
    const button = el("button", `tri tri-${stateName(value)}`, stateGlyph(value));
    button.type = "button";
    button.dataset.attr = attr;
    button.dataset.state = stateName(value);
    button.title = `toggle with ${index + 1}`;
    button.addEventListener("click", () => handlers.onToggle(attr));
    row.appendChild(button);
    row.appendChild(el("span", "label-origin", draftOrigin(attr, store.draft, message)));
    rows.appendChild(row);
  });
  panel.appendChild(rows);

  const actions = el("div", "panel-actions");
  const save = el("button", "action-save", "save (s)");
  save.type = "button";
  save.disabled = !store.dirty || store.busy;
  save.addEventListener("click", () => handlers.onSave());
  actions.appendChild(save);
  const clear = el("button", "action-clear", "clear unknowns (c)");
  clear.type = "button";
  clear.disabled = store.busy;
  clear.addEventListener("click", () => handlers.onClear());
  actions.appendChild(clear);
  if (store.dirty) {
    actions.appendChild(el("span", "dirty-flag", "unsaved changes"));
  }
  panel.appendChild(actions);
  return panel;
}

// ------------------------------------------------------------ top level

export function render(
  root: HTMLElement,
  store: AnnotationStore,
  handlers: ViewHandlers,
  options: ViewOptions,
): void {
  root.textContent = "";
  const layout = el("div", "layout");
  layout.appendChild(renderTopbar(store, handlers));
  layout.appendChild(renderMatchList(store, handlers, options));
  layout.appendChild(renderMessages(store, handlers, options));
  layout.appendChild(renderPanel(store, handlers, options));
  root.appendChild(layout);

  for (const selected of root.querySelectorAll(".selected")) {
    if (typeof selected.scrollIntoView === "function") {
      selected.scrollIntoView({ block: "nearest" });
    }
  }
}
