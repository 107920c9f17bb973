/** Typed client for the descriptor editing service HTTP+JSON API.
 *
 * The studio performs no descriptor or reconstruction math of its own;
 * every numeric value displayed comes from these endpoints.
 */

export interface DescriptorPreviews {
  /** base64 PNG */
  edges: string;
  /** base64 PNG */
  segmentation: string;
}

export interface ExtractResponse {
  schema_version: number;
  checkpoint: string | null;
  session_id: string;
  previews: DescriptorPreviews;
  histogram: number[];
  histogram_centres: number[];
  histogram_mean_L: number;
  centroids: [number, number][];
  labels: number[][];
  height: number;
  width: number;
}

export type EditOp =
  | { op: "recolour"; cluster: number; ab: [number, number] }
  | { op: "shift_hist"; delta: number }
  | { op: "undo" };

export type EditResponse = ExtractResponse;

export interface ReconstructResponse {
  schema_version: number;
  checkpoint: string | null;
  session_id: string;
  /** base64 PNG */
  image: string;
  mean_L: number;
  psnr?: number;
  ssim?: number;
}

export interface HealthResponse {
  schema_version: number;
  checkpoint: string | null;
  status: string;
  uptime: number;
  sessions: number;
}

export interface SessionInfoResponse {
  schema_version: number;
  session_id: string;
  created_at: number;
  edit_count: number;
  undo_depth: number;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
  }
}

/** User-facing message for an upload/edit failure. */
export function describeError(err: unknown): string {
  if (err instanceof ServiceError) {
    if (err.status === 413) return "Image too large (8 MiB limit).";
    if (err.status === 400) return "That file is not a decodable image.";
    if (err.status === 404) return "Session expired — please upload again.";
    if (err.status === 422) return `Edit rejected: ${err.detail}`;
    if (err.status === 503) return "No model checkpoint loaded on the server.";
    return `Server error (${err.status}): ${err.detail}`;
  }
  return err instanceof Error ? err.message : String(err);
}

async function parseOrThrow<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = (await res.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ServiceError(res.status, detail);
  }
  return (await res.json()) as T;
}

export class StudioApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async extract(file: Blob, filename = "upload.png"): Promise<ExtractResponse> {
    const form = new FormData();
    form.append("file", file, filename);
    const res = await this.fetchFn(`${this.baseUrl}/extract`, {
      method: "POST",
      body: form,
    });
    return parseOrThrow<ExtractResponse>(res);
  }

  async edit(sessionId: string, edits: EditOp[]): Promise<EditResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/edit`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ session_id: sessionId, edits }),
    });
    return parseOrThrow<EditResponse>(res);
  }

  async reconstruct(sessionId: string): Promise<ReconstructResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/reconstruct`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ session_id: sessionId }),
    });
    return parseOrThrow<ReconstructResponse>(res);
  }

  async health(): Promise<HealthResponse> {
    return parseOrThrow<HealthResponse>(await this.fetchFn(`${this.baseUrl}/health`));
  }

  async sessionInfo(sessionId: string): Promise<SessionInfoResponse> {
    return parseOrThrow<SessionInfoResponse>(
      await this.fetchFn(`${this.baseUrl}/session/${sessionId}`),
    );
  }
}
