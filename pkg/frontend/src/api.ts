/**
 * Typed client for the mission HTTP API with optimistic versioning.
 *
 * Every mutation carries the state version it was drafted against; the
 * service answers a version_conflict error when someone else moved the
 * mission first, and the caller is expected to reload and re-apply.
 */

import type { ApiErrorBody, MissionState, Point, PolygonPayload } from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.status = status;
  }
}

export class VersionConflictError extends ApiError {}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function raiseForError(resp: Response): Promise<void> {
  if (resp.ok) return;
  let body: ApiErrorBody;
  try {
    body = (await resp.json()) as ApiErrorBody;
  } catch {
    body = { code: "http_error", message: `HTTP ${resp.status}` };
  }
  if (body.code === "version_conflict") {
    throw new VersionConflictError(resp.status, body);
  }
  throw new ApiError(resp.status, body);
}

export class MissionClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`);
    await raiseForError(resp);
    return (await resp.json()) as T;
  }

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    await raiseForError(resp);
    return (await resp.json()) as T;
  }

  getState(): Promise<MissionState> {
    return this.get<MissionState>("/state");
  }

  /** Artifact payloads are JSON documents (CSV stages are not rendered). */
  getArtifact<T>(stage: string, name?: string): Promise<T> {
    const suffix = name ? `?name=${encodeURIComponent(name)}` : "";
    return this.get<T>(`/artifact/${stage}${suffix}`);
  }

  submitObstacles(version: number, polygons: PolygonPayload[]): Promise<MissionState> {
    return this.post("/operator/obstacles", { version, polygons });
  }

  submitUnloadPoints(version: number, points: Point[]): Promise<MissionState> {
    return this.post("/operator/unload-points", { version, points });
  }

  submitSweepDir(version: number, mode: "auto" | "fixed", radians?: number): Promise<MissionState> {
    return this.post("/operator/sweep-dir", { version, mode, radians });
  }

  validateObstacles(version: number): Promise<MissionState> {
    return this.post("/operator/validate-obstacles", { version, confirmed: true });
  }

  advance(stage: string, version: number, force = false): Promise<MissionState> {
    return this.post(`/advance/${stage}`, { version, force });
  }
}
