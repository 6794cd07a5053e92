// Annotation state machine, UI-agnostic.
//
// Holds the match list, the loaded match's chat, the selection, and a
// label draft for the selected message.  The draft starts as the
// server's merged view (manual decisions over automatic prefill) and
// diverges only through explicit toggles; every other value on screen
// comes from the last server response, never from local guessing.
//
// Mutations go through save()/clear(), which re-adopt whatever row the
// server answers with — including the current row carried by a version
// conflict — so after any round-trip the controls show server state.

import {
  AnnotationApi,
  ApiError,
  ConflictError,
  MatchSummary,
  Message,
} from "./api.js";
import { Action, NavDirection } from "./keymap.js";
import {
  Attribute,
  LabelMap,
  applyToggle,
  emptyLabels,
  labelsEqual,
  mergedLabels,
} from "./labels.js";

export type StoreEvent =
  | { kind: "render" }
  | { kind: "toast"; text: string; tone: "info" | "error" }
  | { kind: "cue"; edge: "start" | "end" };

export type StoreListener = (event: StoreEvent) => void;

export function errorText(err: unknown): string {
  if (err instanceof ApiError) {
    return err.detail;
  }
  return err instanceof Error ? err.message : String(err);
}

function randomAnnotatorId(): string {
  return `tab-${crypto.randomUUID().slice(0, 8)}`;
}

export class AnnotationStore {
  matches: MatchSummary[] = [];
  onlyUnclassified = false;
  matchIndex = -1;
  messages: Message[] = [];
  messageIndex = -1;
  draft: LabelMap = emptyLabels();
  dirty = false;
  busy = false;

  readonly annotatorId: string;
  private listeners: StoreListener[] = [];

  constructor(
    private readonly api: AnnotationApi,
    annotatorId?: string,
  ) {
    this.annotatorId = annotatorId ?? randomAnnotatorId();
  }

  // ------------------------------------------------------------ events

  subscribe(listener: StoreListener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((fn) => fn !== listener);
    };
  }

  private emit(event: StoreEvent): void {
    for (const listener of this.listeners) {
      listener(event);
    }
  }

  private render(): void {
    this.emit({ kind: "render" });
  }

  private toast(text: string, tone: "info" | "error"): void {
    this.emit({ kind: "toast", text, tone });
  }

  private cue(edge: "start" | "end"): void {
    this.emit({ kind: "cue", edge });
  }

  // --------------------------------------------------------- selection

  get selectedMatch(): MatchSummary | null {
    return this.matchIndex >= 0 ? (this.matches[this.matchIndex] ?? null) : null;
  }

  get selectedMessage(): Message | null {
    return this.messageIndex >= 0 ? (this.messages[this.messageIndex] ?? null) : null;
  }

  /** The server's merged view of the selected message; the draft's anchor. */
  get baseline(): LabelMap {
    const message = this.selectedMessage;
    return message ? mergedLabels(message.auto_labels, message.manual_labels) : emptyLabels();
  }

  /**
   * Matches to list under the active filter.  The selected match stays
   * visible even once fully labeled, so saving the last message of a
   * match never yanks the view out from under the annotator.
   */
  visibleMatches(): { match: MatchSummary; index: number }[] {
    const rows: { match: MatchSummary; index: number }[] = [];
    this.matches.forEach((match, index) => {
      if (this.matchVisible(index) || index === this.matchIndex) {
        rows.push({ match, index });
      }
    });
    return rows;
  }

  private matchVisible(index: number): boolean {
    const match = this.matches[index];
    return match !== undefined && (!this.onlyUnclassified || match.unclassified_messages > 0);
  }

  // ------------------------------------------------------------ loading

  async init(): Promise<void> {
    this.matches = await this.api.listMatches();
    const first = this.onlyUnclassified
      ? this.matches.findIndex((m) => m.unclassified_messages > 0)
      : this.matches.length > 0
        ? 0
        : -1;
    if (first === -1) {
      this.render();
      return;
    }
    await this.loadMatch(first, "first");
  }

  private async loadMatch(index: number, select: "first" | "last"): Promise<void> {
    const match = this.matches[index];
    if (match === undefined) {
      return;
    }
    const messages = await this.api.matchMessages(match.match_id);
    this.matchIndex = index;
    this.messages = messages;
    this.messageIndex =
      messages.length === 0 ? -1 : select === "first" ? 0 : messages.length - 1;
    this.seedDraft();
    this.render();
  }

  private seedDraft(): void {
    this.draft = this.baseline;
    this.dirty = false;
  }

  /** Swap in a row the server just returned and re-anchor the draft. */
  private adopt(updated: Message): void {
    const index = this.messages.findIndex((m) => m.message_id === updated.message_id);
    if (index !== -1) {
      this.messages[index] = updated;
    }
    if (index === this.messageIndex) {
      this.seedDraft();
    }
  }

  /** Best-effort match-summary refresh after a mutation. */
  private async refreshMatches(): Promise<void> {
    try {
      const fresh = await this.api.listMatches();
      const currentId = this.selectedMatch?.match_id ?? null;
      this.matches = fresh;
      if (currentId !== null) {
        const index = fresh.findIndex((m) => m.match_id === currentId);
        if (index !== -1) {
          this.matchIndex = index;
        }
      }
    } catch {
      // stale counts are tolerable; the next mutation retries
    }
  }

  // --------------------------------------------------------- navigation

  async dispatch(action: Action): Promise<void> {
    switch (action.kind) {
      case "navigate":
        return this.navigate(action.dir);
      case "toggle":
        this.toggle(action.attr);
        return;
      case "save":
        return this.save();
      case "clear":
        return this.clear();
    }
  }

  async navigate(dir: NavDirection): Promise<void> {
    if (this.busy) {
      return;
    }
    if (this.matchIndex === -1) {
      this.cue(dir === "prev_message" || dir === "prev_match" ? "start" : "end");
      return;
    }
    switch (dir) {
      case "next_message": {
        if (this.messageIndex + 1 < this.messages.length) {
          this.moveTo(this.messageIndex + 1);
          return;
        }
        return this.stepMatch(1, "first", "end");
      }
      case "prev_message": {
        if (this.messageIndex > 0) {
          this.moveTo(this.messageIndex - 1);
          return;
        }
        return this.stepMatch(-1, "last", "start");
      }
      case "next_match":
        return this.stepMatch(1, "first", "end");
      case "prev_match":
        return this.stepMatch(-1, "first", "start");
    }
  }

  private moveTo(index: number): void {
    this.noteDiscardedEdits();
    this.messageIndex = index;
    this.seedDraft();
    this.render();
  }

  private async stepMatch(
    step: 1 | -1,
    select: "first" | "last",
    edge: "start" | "end",
  ): Promise<void> {
    const target = this.adjacentMatch(step);
    if (target === -1) {
      this.cue(edge);
      return;
    }
    this.noteDiscardedEdits();
    this.busy = true;
    this.render();
    try {
      await this.loadMatch(target, select);
    } catch (err) {
      this.toast(errorText(err), "error");
    } finally {
      this.busy = false;
      this.render();
    }
  }

  /** Nearest neighbor in list order, skipping filtered-out matches. */
  private adjacentMatch(step: 1 | -1): number {
    for (let i = this.matchIndex + step; i >= 0 && i < this.matches.length; i += step) {
      if (this.matchVisible(i)) {
        return i;
      }
    }
    return -1;
  }

  async selectMatch(matchId: string): Promise<void> {
    const index = this.matches.findIndex((m) => m.match_id === matchId);
    if (index === -1 || index === this.matchIndex || this.busy) {
      return;
    }
    this.noteDiscardedEdits();
    this.busy = true;
    this.render();
    try {
      await this.loadMatch(index, "first");
    } catch (err) {
      this.toast(errorText(err), "error");
    } finally {
      this.busy = false;
      this.render();
    }
  }

  selectMessage(messageId: string): void {
    const index = this.messages.findIndex((m) => m.message_id === messageId);
    if (index !== -1 && index !== this.messageIndex) {
      this.moveTo(index);
    }
  }

  private noteDiscardedEdits(): void {
    if (this.dirty) {
      this.toast("unsaved edits discarded", "info");
    }
  }

  setFilter(on: boolean): void {
    this.onlyUnclassified = on;
    this.render();
  }

  // ------------------------------------------------------------ editing

  toggle(attr: Attribute): void {
    if (this.selectedMessage === null) {
      return;
    }
    this.draft = applyToggle(this.draft, attr);
    this.dirty = !labelsEqual(this.draft, this.baseline);
    this.render();
  }

  async save(): Promise<void> {
    const message = this.selectedMessage;
    if (message === null || this.busy || !this.dirty) {
      return;
    }
    this.busy = true;
    this.render();
    try {
      const updated = await this.api.putLabels(
        message.message_id,
        this.draft,
        this.annotatorId,
        message.version,
      );
      this.adopt(updated);
      this.toast("saved", "info");
      await this.refreshMatches();
    } catch (err) {
      if (err instanceof ConflictError) {
        this.adopt(err.current);
        this.toast("someone saved first; showing the server's labels", "error");
      } else {
        // keep the draft and the dirty flag so nothing is lost
        this.toast(errorText(err), "error");
      }
    } finally {
      this.busy = false;
      this.render();
    }
  }

  async clear(): Promise<void> {
    const message = this.selectedMessage;
    if (message === null || this.busy) {
      return;
    }
    this.busy = true;
    this.render();
    try {
      const updated = await this.api.clearUnknowns(message.message_id);
      if (this.dirty) {
        this.toast("unsaved edits discarded", "info");
      }
      this.adopt(updated);
      this.toast("unknowns resolved", "info");
      await this.refreshMatches();
    } catch (err) {
      this.toast(errorText(err), "error");
    } finally {
      this.busy = false;
      this.render();
    }
  }
}
