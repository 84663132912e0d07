/**
 * History of render attempts.
 *
 * Each entry captures everything a render depends on — the exact input
 * bytes, the full settings, and the seed — so any past attempt can be
 * resubmitted and reproduce its result byte for byte. Entries are frozen on
 * creation and never edited; "change one knob and try again" goes through
 * `duplicateSettings`, which derives a fresh settings object instead.
 */

import type { RenderClient, RenderInputs, RenderSettings } from './api.js';

export interface Attempt {
  readonly jobId: string;
  readonly submittedAt: number;
  readonly settings: Readonly<RenderSettings>;
  readonly inputs: Readonly<RenderInputs>;
}

function freezeSettings(settings: RenderSettings): Readonly<RenderSettings> {
  return Object.freeze({
    ...settings,
    resolutions: Object.freeze([...settings.resolutions]) as unknown as number[],
  });
}

function copyInputs(inputs: RenderInputs): Readonly<RenderInputs> {
  const copy: RenderInputs = {
    content: inputs.content.slice(),
    style: inputs.style.slice(),
  };
  if (inputs.contentMap !== undefined) copy.contentMap = inputs.contentMap.slice();
  if (inputs.styleMap !== undefined) copy.styleMap = inputs.styleMap.slice();
  return Object.freeze(copy);
}

export class AttemptHistory {
  private readonly attempts: Attempt[] = [];

  /** Record a submitted job. Input bytes are copied; the entry is frozen. */
  record(jobId: string, settings: RenderSettings, inputs: RenderInputs): Attempt {
    const attempt: Attempt = Object.freeze({
      jobId,
      submittedAt: Date.now(),
      settings: freezeSettings(settings),
      inputs: copyInputs(inputs),
    });
    this.attempts.push(attempt);
    return attempt;
  }

  /** Newest last. The returned array is a frozen snapshot. */
  list(): readonly Attempt[] {
    return Object.freeze([...this.attempts]);
  }

  get(jobId: string): Attempt | undefined {
    return this.attempts.find((a) => a.jobId === jobId);
  }

  /**
   * Settings for a new attempt based on an old one, with only the given
   * fields changed. The stored entry is untouched.
   */
  duplicateSettings(jobId: string, overrides: Partial<RenderSettings>): RenderSettings {
    const base = this.get(jobId);
    if (base === undefined) {
      throw new Error(`no attempt with job id ${jobId}`);
    }
    return {
      ...base.settings,
      ...overrides,
      resolutions: [...(overrides.resolutions ?? base.settings.resolutions)],
    };
  }

  /**
   * Resubmit a recorded attempt exactly as it ran — same inputs, same
   * settings, same seed — and return the new job id.
   */
  async resubmit(client: RenderClient, jobId: string): Promise<string> {
    const attempt = this.get(jobId);
    if (attempt === undefined) {
      throw new Error(`no attempt with job id ${jobId}`);
    }
    return client.submit(attempt.inputs, { ...attempt.settings });
  }
}
