/**
 * Query-session state: the uploaded document, chosen k and temperature, the
 * most recent ranked view, and the label browser. All transitions go through
 * the service; the session never invents results.
 */

import { ApiClient, ApiError, ServiceUnreachableError } from "./api.js";
import { filterLabels, resultRows, type ResultRow } from "./render.js";
import { parsePoseseqDocument, ValidationError, type PoseseqDocument } from "./schema.js";

export type AddOutcome =
  | { kind: "added"; count: number }
  | { kind: "duplicate"; message: string }
  | { kind: "rejected"; message: string };

export class QuerySession {
  document: PoseseqDocument | null = null;
  documentName = "";
  k = 5;
  temperature: number | null = null;
  lastRows: ResultRow[] | null = null;
  error: string | null = null;
  labels: string[] = [];
  labelsStale = true;

  constructor(private readonly client: ApiClient) {}

  /** Validate and attach an uploaded document; invalid files set `error`. */
  loadDocument(name: string, text: string): boolean {
    try {
      this.document = parsePoseseqDocument(text);
      this.documentName = name;
      this.error = null;
      return true;
    } catch (e) {
      if (e instanceof ValidationError) {
        this.error = `invalid poseseq file: ${e.message}`;
        return false;
      }
      throw e;
    }
  }

  /**
   * Send the attached document to /v1/query and keep the rendered rows.
   * Server rejections (4xx) land in `error` without clearing the last
   * successful result.
   */
  async submitQuery(): Promise<ResultRow[] | null> {
    if (this.document === null) {
      this.error = "no document loaded";
      return null;
    }
    try {
      const response = await this.client.query(
        this.document,
        this.k,
        this.temperature ?? undefined,
      );
      this.lastRows = resultRows(response);
      this.error = null;
      return this.lastRows;
    } catch (e) {
      if (e instanceof ApiError || e instanceof ServiceUnreachableError) {
        this.error = e.message;
        return null;
      }
      throw e;
    }
  }

  /** Add a new sign; on success the label list is refreshed from the server. */
  async addSign(label: string, document: PoseseqDocument): Promise<AddOutcome> {
    if (label.trim() === "") {
      return { kind: "rejected", message: "label must not be empty" };
    }
    try {
      const info = await this.client.addSign(label, document);
      await this.refreshLabels();
      return { kind: "added", count: info.count };
    } catch (e) {
      if (e instanceof ApiError && e.status === 409) {
        return { kind: "duplicate", message: e.message };
      }
      if (e instanceof ApiError || e instanceof ServiceUnreachableError) {
        return { kind: "rejected", message: e.message };
      }
      throw e;
    }
  }

  /** Pull the label list from the server (the browser's source of truth). */
  async refreshLabels(): Promise<string[]> {
    this.labels = await this.client.labels();
    this.labelsStale = false;
    return this.labels;
  }

  /** Client-side case-insensitive prefix filtering over the fetched labels. */
  browseLabels(prefix: string): string[] {
    return filterLabels(this.labels, prefix);
  }
}
