/**
 * Vitest global setup: start a real render service for the integration
 * tests and tear it down when the run finishes.
 */

import { spawn, type ChildProcess } from 'node:child_process';
import { setTimeout as delay } from 'node:timers/promises';

import { SERVICE_URL, SERVICE_PORT } from './service-url.js';

let child: ChildProcess | null = null;

async function waitUntilReady(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${SERVICE_URL}/api/jobs/ready-probe`);
      if (res.status === 404) return; // service is answering
    } catch (error) {
      lastError = error;
    }
    await delay(200);
  }
  throw new Error(`render service did not come up on port ${SERVICE_PORT}: ${String(lastError)}`);
}

export async function setup(): Promise<void> {
  child = spawn(
    'python3',
    ['-c', `from doodle.service import serve; serve(port=${SERVICE_PORT})`],
    { stdio: 'ignore' },
  );
  child.on('exit', (code) => {
    if (code !== null && code !== 0) {
      console.error(`render service exited early with code ${code}`);
    }
  });
  await waitUntilReady(30_000);
}

export async function teardown(): Promise<void> {
  if (child !== null && child.exitCode === null) {
    child.kill('SIGTERM');
    const proc = child;
    await new Promise<void>((resolve) => {
      const timer = setTimeout(() => {
        proc.kill('SIGKILL');
        resolve();
      }, 3000);
      proc.on('exit', () => {
        clearTimeout(timer);
        resolve();
      });
    });
  }
  child = null;
}
