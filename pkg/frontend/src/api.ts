/**
 * Client for the render service HTTP API.
 *
 * One rule shapes everything here: a render job must never be submitted
 * twice by accident. POSTs are therefore never auto-retried — if submission
 * fails the caller decides — while the idempotent GET polls retry with
 * exponential backoff until the network comes back.
 */

export type Gamma = number | 'auto';

export interface RenderSettings {
  alpha: number;
  beta: number;
  gamma: Gamma;
  patchSize: number;
  /** Coarse-to-fine schedule: max image side per level, increasing. */
  resolutions: number[];
  iterations: number;
  seed: number;
}

export const DEFAULT_SETTINGS: Readonly<RenderSettings> = Object.freeze({
  alpha: 10,
  beta: 100,
  gamma: 'auto' as Gamma,
  patchSize: 3,
  resolutions: Object.freeze([64, 128, 256]) as unknown as number[],
  iterations: 100,
  seed: 0,
});

/** A fresh 32-bit seed; recorded per attempt so renders can be reproduced. */
export function randomSeed(): number {
  const buf = new Uint32Array(1);
  crypto.getRandomValues(buf);
  return buf[0];
}

export type JobState = 'queued' | 'running' | 'done' | 'failed';

export interface JobStatus {
  id: string;
  state: JobState;
  progress: number;
  config: Record<string, unknown>;
  error: string | null;
}

export interface RenderInputs {
  content: Uint8Array;
  style: Uint8Array;
  contentMap?: Uint8Array;
  styleMap?: Uint8Array;
}

/** A non-2xx response; `message` carries the service's detail verbatim. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = 'ApiError';
  }
}

export const POLL_INTERVAL_MS = 500;
const BACKOFF_START_MS = 500;
const BACKOFF_CAP_MS = 5000;

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === 'string') return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText || `HTTP ${response.status}`;
  }
}

function configPayload(settings: RenderSettings): Record<string, unknown> {
  return {
    alpha: settings.alpha,
    beta: settings.beta,
    gamma: settings.gamma,
    patch_size: settings.patchSize,
    resolutions: settings.resolutions,
    iterations: settings.iterations,
    seed: settings.seed,
  };
}

export interface PollOptions {
  intervalMs?: number;
  onUpdate?: (status: JobStatus) => void;
  /** Give up after this many consecutive network failures (default: never). */
  maxNetworkFailures?: number;
}

export class RenderClient {
  private readonly fetchImpl: typeof fetch;

  constructor(
    readonly baseUrl: string,
    fetchImpl?: typeof fetch,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, '')}${path}`;
  }

  /**
   * Submit a render job. Resolves to the job id.
   *
   * Not retried on failure: repeating a POST that may already have been
   * accepted would queue a duplicate job.
   */
  async submit(inputs: RenderInputs, settings: RenderSettings): Promise<string> {
    const form = new FormData();
    const part = (bytes: Uint8Array) => new Blob([bytes.slice().buffer], { type: 'image/png' });
    form.append('content', part(inputs.content), 'content.png');
    form.append('style', part(inputs.style), 'style.png');
    if (inputs.contentMap !== undefined) {
      form.append('content_map', part(inputs.contentMap), 'content_map.png');
    }
    if (inputs.styleMap !== undefined) {
      form.append('style_map', part(inputs.styleMap), 'style_map.png');
    }
    form.append('config', JSON.stringify(configPayload(settings)));

    const response = await this.fetchImpl(this.url('/api/render'), {
      method: 'POST',
      body: form,
    });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    const body = (await response.json()) as { id: string };
    return body.id;
  }

  async status(jobId: string): Promise<JobStatus> {
    const response = await this.fetchImpl(this.url(`/api/jobs/${jobId}`));
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as JobStatus;
  }

  /**
   * Poll a job every `intervalMs` (default 500 ms) until it is done or
   * failed. Network errors back off exponentially and re-poll the same job;
   * a 4xx/5xx from the service is not retried and throws.
   */
  async waitForJob(jobId: string, options: PollOptions = {}): Promise<JobStatus> {
    const interval = options.intervalMs ?? POLL_INTERVAL_MS;
    let backoff = BACKOFF_START_MS;
    let failures = 0;
    for (;;) {
      let status: JobStatus;
      try {
        status = await this.status(jobId);
      } catch (error) {
        if (error instanceof ApiError) throw error;
        failures += 1;
        if (options.maxNetworkFailures !== undefined && failures >= options.maxNetworkFailures) {
          throw error;
        }
        await sleep(backoff);
        backoff = Math.min(backoff * 2, BACKOFF_CAP_MS);
        continue;
      }
      failures = 0;
      backoff = BACKOFF_START_MS;
      options.onUpdate?.(status);
      if (status.state === 'done' || status.state === 'failed') {
        return status;
      }
      await sleep(interval);
    }
  }

  /** Latest in-progress preview PNG, or null if none exists yet. */
  async preview(jobId: string): Promise<Uint8Array | null> {
    const response = await this.fetchImpl(this.url(`/api/jobs/${jobId}/preview`));
    if (response.status === 204) return null;
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return new Uint8Array(await response.arrayBuffer());
  }

  /** The finished result PNG. 409 until the job is done. */
  async result(jobId: string): Promise<Uint8Array> {
    const response = await this.fetchImpl(this.url(`/api/jobs/${jobId}/result`));
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return new Uint8Array(await response.arrayBuffer());
  }

  /** Ask the service to cancel; the job ends failed with error "cancelled". */
  async cancel(jobId: string): Promise<void> {
    const response = await this.fetchImpl(this.url(`/api/jobs/${jobId}`), { method: 'DELETE' });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
  }
}
