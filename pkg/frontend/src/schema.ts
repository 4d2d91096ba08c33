/**
 * Client-side validation of the poseseq document and service responses.
 *
 * The browser never recomputes probabilities; validation only ensures we
 * send well-formed documents and render exactly what the server returned.
 */

export const LANDMARKS = 75;
export const LANDMARK_SPEC = "pose33+lhand21+rhand21";

export interface PoseseqDocument {
  version: number;
  fps: number;
  landmark_spec: string;
  dims: number;
  frames: Array<{
    points: number[][];
    presence: { pose: boolean; lhand: boolean; rhand: boolean };
  }>;
  source_id?: string;
}

export interface QueryResultEntry {
  label: string;
  probability: number;
  rank: number;
}

export interface QueryResponse {
  results: QueryResultEntry[];
}

export interface SupportInfo {
  count: number;
  dim: number;
  model_fingerprint: string;
  similarity: string;
  temperature: number;
}

export class ValidationError extends Error {}

function fail(message: string): never {
  throw new ValidationError(message);
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function requireFiniteNumber(value: unknown, where: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    fail(`${where} must be a finite number`);
  }
  return value;
}

/** Parse and validate an uploaded poseseq JSON document. */
export function parsePoseseqDocument(text: string): PoseseqDocument {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    fail(`not valid JSON: ${(e as Error).message}`);
  }
  if (!isRecord(doc)) fail("top level must be an object");
  if (doc.version !== 1) fail(`unsupported version ${String(doc.version)}`);
  if (doc.landmark_spec !== LANDMARK_SPEC) {
    fail(`unsupported landmark_spec ${String(doc.landmark_spec)}`);
  }
  if (doc.dims !== 3) fail(`dims must be 3, got ${String(doc.dims)}`);
  const fps = requireFiniteNumber(doc.fps, "fps");
  if (fps <= 0) fail(`fps must be positive, got ${fps}`);
  if (!Array.isArray(doc.frames) || doc.frames.length < 1) {
    fail("frames must be a non-empty array");
  }
  doc.frames.forEach((frame, t) => {
    if (!isRecord(frame)) fail(`frame ${t} must be an object`);
    const points = frame.points;
    if (!Array.isArray(points) || points.length !== LANDMARKS) {
      fail(`frame ${t} must contain exactly ${LANDMARKS} points`);
    }
    points.forEach((point, i) => {
      if (!Array.isArray(point) || point.length !== 3) {
        fail(`frame ${t}, landmark ${i}: expected [x, y, z]`);
      }
      point.forEach((v) => requireFiniteNumber(v, `frame ${t}, landmark ${i}`));
    });
    const presence = frame.presence;
    if (!isRecord(presence)) fail(`frame ${t}: presence must be an object`);
    for (const group of ["pose", "lhand", "rhand"] as const) {
      if (typeof presence[group] !== "boolean") {
        fail(`frame ${t}: presence.${group} must be a boolean`);
      }
    }
  });
  if (doc.source_id !== undefined && typeof doc.source_id !== "string") {
    fail("source_id must be a string");
  }
  return doc as unknown as PoseseqDocument;
}

export function parseQueryResponse(data: unknown): QueryResponse {
  if (!isRecord(data) || !Array.isArray(data.results)) {
    fail("response must carry a results array");
  }
  const results = data.results.map((entry, i) => {
    if (!isRecord(entry)) fail(`result ${i} must be an object`);
    if (typeof entry.label !== "string") fail(`result ${i}: label must be a string`);
    const probability = requireFiniteNumber(entry.probability, `result ${i} probability`);
    if (probability <= 0 || probability > 1) {
      fail(`result ${i}: probability out of (0, 1]`);
    }
    const rank = requireFiniteNumber(entry.rank, `result ${i} rank`);
    if (!Number.isInteger(rank) || rank !== i + 1) {
      fail(`result ${i}: rank must be ${i + 1}`);
    }
    return { label: entry.label, probability, rank };
  });
  return { results };
}

export function parseLabels(data: unknown): string[] {
  if (!isRecord(data) || !Array.isArray(data.labels)) {
    fail("response must carry a labels array");
  }
  return data.labels.map((label, i) => {
    if (typeof label !== "string") fail(`label ${i} must be a string`);
    return label;
  });
}

export function parseSupportInfo(data: unknown): SupportInfo {
  if (!isRecord(data)) fail("info response must be an object");
  const count = requireFiniteNumber(data.count, "count");
  const dim = requireFiniteNumber(data.dim, "dim");
  if (typeof data.model_fingerprint !== "string") fail("model_fingerprint must be a string");
  if (typeof data.similarity !== "string") fail("similarity must be a string");
  const temperature = requireFiniteNumber(data.temperature, "temperature");
  return {
    count,
    dim,
    model_fingerprint: data.model_fingerprint,
    similarity: data.similarity,
    temperature,
  };
}
