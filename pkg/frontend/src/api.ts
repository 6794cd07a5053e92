// Typed client for the annotation HTTP API.
//
// Everything the UI knows about a message or match comes through this
// module; there is no other channel to the backend.  Non-2xx responses
// become ApiError (409 with the server's current row: ConflictError) so
// callers can branch on status without touching fetch internals.

import { LabelMap, labelsFrom } from "./labels.js";

export interface MatchSummary {
  match_id: string;
  source_id: string;
  message_count: number;
  unclassified_messages: number;
  classified: boolean;
}

export interface Message {
  message_id: string;
  match_id: string;
  player_guid: string;
  author_account_id: number;
  author_name: string;
  clock: number;
  text: string;
  auto_labels: LabelMap;
  manual_labels: LabelMap;
  cs: number;
  pcs: number;
  version: number;
}

export interface Health {
  status: string;
  messages: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export class ConflictError extends ApiError {
  constructor(
    detail: string,
    readonly current: Message,
  ) {
    super(409, detail);
    this.name = "ConflictError";
  }
}

/** The surface the annotation state machine needs; tests fake this. */
export interface AnnotationApi {
  health(): Promise<Health>;
  listMatches(): Promise<MatchSummary[]>;
  matchMessages(matchId: string): Promise<Message[]>;
  getMessage(messageId: string): Promise<Message>;
  putLabels(
    messageId: string,
    labels: LabelMap,
    annotatorId: string,
    expectedVersion: number | null,
  ): Promise<Message>;
  clearUnknowns(messageId: string): Promise<Message>;
}

const MATCH_PAGE_SIZE = 500;
const MAX_MATCH_PAGES = 40;

function messageFrom(raw: Record<string, unknown>): Message {
  return {
    message_id: String(raw.message_id),
    match_id: String(raw.match_id),
    player_guid: String(raw.player_guid),
    author_account_id: Number(raw.author_account_id),
    author_name: String(raw.author_name ?? ""),
    clock: Number(raw.clock),
    text: String(raw.text),
    auto_labels: labelsFrom((raw.auto_labels ?? {}) as Record<string, unknown>),
    manual_labels: labelsFrom((raw.manual_labels ?? {}) as Record<string, unknown>),
    cs: Number(raw.cs),
    pcs: Number(raw.pcs),
    version: Number(raw.version),
  };
}

export class HttpApi implements AnnotationApi {
  constructor(private readonly baseUrl: string = "") {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<Record<string, unknown>> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, `network error: ${String(err)}`);
    }
    let payload: Record<string, unknown> = {};
    try {
      payload = (await response.json()) as Record<string, unknown>;
    } catch {
      // non-JSON body; fall through with the status alone
    }
    if (response.status === 409 && payload.current) {
      throw new ConflictError(
        String(payload.detail ?? "version conflict"),
        messageFrom(payload.current as Record<string, unknown>),
      );
    }
    if (!response.ok) {
      throw new ApiError(response.status, String(payload.detail ?? response.statusText));
    }
    return payload;
  }

  async health(): Promise<Health> {
    const payload = await this.request("GET", "/api/health");
    return { status: String(payload.status), messages: Number(payload.messages) };
  }

  /** Every match summary, walking the pages so callers see one flat list. */
  async listMatches(): Promise<MatchSummary[]> {
    const matches: MatchSummary[] = [];
    for (let page = 1; page <= MAX_MATCH_PAGES; page++) {
      const payload = await this.request(
        "GET",
        `/api/matches?page=${page}&page_size=${MATCH_PAGE_SIZE}`,
      );
      const batch = (payload.matches ?? []) as Record<string, unknown>[];
      for (const raw of batch) {
        matches.push({
          match_id: String(raw.match_id),
          source_id: String(raw.source_id),
          message_count: Number(raw.message_count),
          unclassified_messages: Number(raw.unclassified_messages),
          classified: Boolean(raw.classified),
        });
      }
      if (matches.length >= Number(payload.total) || batch.length === 0) {
        break;
      }
    }
    return matches;
  }

  async matchMessages(matchId: string): Promise<Message[]> {
    const payload = await this.request(
      "GET",
      `/api/matches/${encodeURIComponent(matchId)}/messages`,
    );
    return ((payload.messages ?? []) as Record<string, unknown>[]).map(messageFrom);
  }

  async getMessage(messageId: string): Promise<Message> {
    const payload = await this.request(
      "GET",
      `/api/messages/${encodeURIComponent(messageId)}`,
    );
    return messageFrom(payload.message as Record<string, unknown>);
  }

  async putLabels(
    messageId: string,
    labels: LabelMap,
    annotatorId: string,
    expectedVersion: number | null,
  ): Promise<Message> {
    const payload = await this.request(
      "PUT",
      `/api/messages/${encodeURIComponent(messageId)}/labels`,
      {
        labels,
        annotator_id: annotatorId,
        expected_version: expectedVersion,
      },
    );
    return messageFrom(payload.message as Record<string, unknown>);
  }

  async clearUnknowns(messageId: string): Promise<Message> {
    const payload = await this.request(
      "POST",
      `/api/messages/${encodeURIComponent(messageId)}/clear-unknowns`,
    );
    return messageFrom(payload.message as Record<string, unknown>);
  }
}
