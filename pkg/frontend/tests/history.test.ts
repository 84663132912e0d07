import { describe, expect, it } from 'vitest';

import { DEFAULT_SETTINGS, type RenderInputs, type RenderSettings } from '../src/api.js';
import { AttemptHistory } from '../src/history.js';

function settings(overrides: Partial<RenderSettings> = {}): RenderSettings {
  return { ...DEFAULT_SETTINGS, resolutions: [...DEFAULT_SETTINGS.resolutions], seed: 123, ...overrides };
}

function inputs(): RenderInputs {
  return {
    content: new Uint8Array([1, 2, 3]),
    style: new Uint8Array([4, 5, 6]),
    contentMap: new Uint8Array([7]),
    styleMap: new Uint8Array([8]),
  };
}

describe('AttemptHistory.record', () => {
  it('records the default content weight of 10', () => {
    const history = new AttemptHistory();
    const attempt = history.record('job-1', settings(), inputs());
    expect(attempt.settings.alpha).toBe(10);
    expect(attempt.settings.seed).toBe(123);
  });

  it('entries are frozen: settings cannot be edited afterwards', () => {
    const history = new AttemptHistory();
    const attempt = history.record('job-1', settings(), inputs());
    expect(() => {
      (attempt.settings as RenderSettings).beta = 999;
    }).toThrow();
    expect(() => {
      (attempt.settings.resolutions as number[]).push(512);
    }).toThrow();
  });

  it('copies input bytes so later mutation cannot corrupt an entry', () => {
    const history = new AttemptHistory();
    const mine = inputs();
    const attempt = history.record('job-1', settings(), mine);
    mine.content[0] = 99;
    expect(attempt.inputs.content[0]).toBe(1);
  });

  it('mutating the passed settings later does not affect the entry', () => {
    const history = new AttemptHistory();
    const mine = settings();
    const attempt = history.record('job-1', mine, inputs());
    mine.beta = 777;
    mine.resolutions.push(1024);
    expect(attempt.settings.beta).toBe(DEFAULT_SETTINGS.beta);
    expect(attempt.settings.resolutions).toEqual([64, 128, 256]);
  });
});

describe('AttemptHistory.list', () => {
  it('returns attempts oldest-first and is a frozen snapshot', () => {
    const history = new AttemptHistory();
    history.record('a', settings(), inputs());
    history.record('b', settings({ beta: 25 }), inputs());
    const list = history.list();
    expect(list.map((x) => x.jobId)).toEqual(['a', 'b']);
    expect(() => {
      (list as unknown as unknown[]).push('junk');
    }).toThrow();
    // a fresh call reflects new entries; the old snapshot stays as it was
    history.record('c', settings(), inputs());
    expect(list).toHaveLength(2);
    expect(history.list()).toHaveLength(3);
  });
});

describe('AttemptHistory.duplicateSettings', () => {
  it('changes only the overridden field', () => {
    const history = new AttemptHistory();
    history.record('a', settings({ beta: 100 }), inputs());
    const next = history.duplicateSettings('a', { beta: 250 });
    const original = history.get('a')!.settings;
    expect(next.beta).toBe(250);
    const { beta: _nb, ...nextRest } = next;
    const { beta: _ob, ...origRest } = original;
    expect(nextRest).toEqual(origRest);
    // and the stored attempt still has its old value
    expect(original.beta).toBe(100);
  });

  it('throws for an unknown job id', () => {
    const history = new AttemptHistory();
    expect(() => history.duplicateSettings('nope', {})).toThrow(/no attempt/);
  });
});
