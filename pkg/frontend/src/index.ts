/**
 * Episodic RL client for the gaterace simulator.
 *
 * Drives the Python-side batch environment over its line-delimited JSON
 * stdio service (`python3 -m gaterace.envserver`). State vectors arrive as
 * exact float64 values; depth images are float32-rounded by the service.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import { createInterface, Interface } from "node:readline";
import type { Readable, Writable } from "node:stream";

type ServiceProcess = ChildProcessByStdio<Writable, Readable, null>;

export interface SpaceInfo {
  n_envs: number;
  /** [height, width] of the depth image, or null when depth is disabled. */
  depth: [number, number] | null;
  state: number;
  waypoints: number;
  action: number;
  action_low: number;
  action_high: number;
}

export interface EnvObservation {
  state: number[];
  waypoints: number[];
  prev_action: number[];
  /** Row-major flat depth image, or null when depth is disabled. */
  depth: number[] | null;
}

export interface StepResult {
  obs: EnvObservation;
  reward_total: number;
  reward_terms: Record<string, number>;
  terminated: boolean;
  cause: string;
  info: Record<string, number | null>;
}

export interface MakeEnvOptions {
  /** YAML config file path; service defaults apply when omitted. */
  configPath?: string;
  /** Nested config overrides, mirroring the YAML schema. */
  overrides?: Record<string, unknown>;
  /** Worker threads on the simulator side. */
  workers?: number;
  /** Python interpreter used to launch the service. */
  python?: string;
}

interface Pending {
  resolve: (value: any) => void;
  reject: (err: Error) => void;
}

export class EnvClientError extends Error {}

/** Handle to a batch of simulator environments behind one service process. */
export class EnvHandle {
  readonly spaces: SpaceInfo;
  private proc: ServiceProcess;
  private lines: Interface;
  private queue: Pending[] = [];
  private closed = false;

  private constructor(proc: ServiceProcess, spaces: SpaceInfo) {
    this.proc = proc;
    this.spaces = spaces;
    this.lines = createInterface({ input: proc.stdout });
    this.lines.on("line", (line) => {
      const pending = this.queue.shift();
      if (!pending) return;
      let parsed: any;
      try {
        parsed = JSON.parse(line);
      } catch (err) {
        pending.reject(new EnvClientError(`unparseable response: ${line}`));
        return;
      }
      if (parsed.ok) pending.resolve(parsed);
      else pending.reject(new EnvClientError(parsed.error ?? "service error"));
    });
    proc.on("exit", () => {
      this.closed = true;
      for (const pending of this.queue.splice(0)) {
        pending.reject(new EnvClientError("service exited"));
      }
    });
  }

  static async create(nEnvs: number, options: MakeEnvOptions = {}): Promise<EnvHandle> {
    const python = options.python ?? "python3";
    const proc = spawn(python, ["-m", "gaterace.envserver"], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    const reader = createInterface({ input: proc.stdout });
    const first = new Promise<any>((resolve, reject) => {
      reader.once("line", (line) => {
        reader.close();
        try {
          const parsed = JSON.parse(line);
          parsed.ok ? resolve(parsed) : reject(new EnvClientError(parsed.error));
        } catch {
          reject(new EnvClientError(`unparseable response: ${line}`));
        }
      });
      proc.once("error", (err) => reject(new EnvClientError(String(err))));
      proc.once("exit", (code) =>
        reject(new EnvClientError(`service exited during startup (code ${code})`)));
    });
    proc.stdin.write(
      JSON.stringify({
        op: "make",
        config: options.configPath ?? null,
        n_envs: nEnvs,
        overrides: options.overrides ?? {},
        workers: options.workers ?? 1,
      }) + "\n",
    );
    const resp = await first;
    proc.removeAllListeners("exit");
    proc.removeAllListeners("error");
    return new EnvHandle(proc, resp.spaces as SpaceInfo);
  }

  private request(payload: Record<string, unknown>): Promise<any> {
    if (this.closed) {
      return Promise.reject(new EnvClientError("handle is closed"));
    }
    return new Promise((resolve, reject) => {
      this.queue.push({ resolve, reject });
      this.proc.stdin.write(JSON.stringify(payload) + "\n");
    });
  }

  /** Reset every env; per-env seeds make the episode fully reproducible. */
  async reset(seeds?: number[]): Promise<EnvObservation[]> {
    if (seeds && seeds.length !== this.spaces.n_envs) {
      throw new EnvClientError(
        `expected ${this.spaces.n_envs} seeds, got ${seeds.length}`);
    }
    const resp = await this.request({ op: "reset", seeds });
    return resp.obs as EnvObservation[];
  }

  /** Advance all envs one control step with actions in [-1, 1]^4. */
  async step(actions: number[][]): Promise<StepResult[]> {
    if (actions.length !== this.spaces.n_envs ||
        actions.some((a) => a.length !== this.spaces.action)) {
      throw new EnvClientError(
        `actions must have shape (${this.spaces.n_envs}, ${this.spaces.action})`);
    }
    if (actions.some((a) => a.some((v) => !Number.isFinite(v)))) {
      throw new EnvClientError("actions must be finite");
    }
    const resp = await this.request({ op: "step", actions });
    return resp.results as StepResult[];
  }

  async close(): Promise<void> {
    if (this.closed) return;
    try {
      await this.request({ op: "close" });
    } finally {
      this.closed = true;
      this.proc.stdin.end();
    }
  }

  get isClosed(): boolean {
    return this.closed;
  }
}

/** Start a simulator service and build a batch of `nEnvs` environments. */
export function makeEnv(nEnvs: number, options: MakeEnvOptions = {}): Promise<EnvHandle> {
  return EnvHandle.create(nEnvs, options);
}

/** Stack per-env state vectors into a [nEnvs][18] matrix. */
export function stackStates(obs: EnvObservation[]): number[][] {
  return obs.map((o) => o.state);
}
