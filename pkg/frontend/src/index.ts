/**
 * minimize-style front end for the dfotr trust-region derivative-free
 * optimization library.
 *
 * Each solve spawns one Python bridge process and speaks line-delimited JSON
 * with it. Objective and constraint callbacks run on the caller's event
 * loop, one request in flight at a time; callback exceptions are marshaled
 * back as a failed result and never cross the boundary unhandled. Arrays are
 * copied at the interface in both directions.
 */

import { spawn, ChildProcessWithoutNullStreams } from "child_process";
import * as path from "path";
import * as readline from "readline";

export type Objective = (x: number[]) => number;

export interface Constraint {
  /** "ineq" means fun(x) >= 0 componentwise; "eq" means fun(x) = 0. */
  type: "ineq" | "eq";
  fun: (x: number[]) => number | number[];
}

export interface LinearBlock {
  a: number[][];
  b: number[];
}

export interface MinimizeOptions {
  method?: "auto" | "cobyla" | "uobyqa" | "newuoa" | "bobyqa" | "lincoa";
  /** scipy-style bounds: one [lower, upper] pair per variable, null = free. */
  bounds?: Array<[number | null, number | null]>;
  constraints?: Constraint | Constraint[];
  /** Linear inequality a x <= b and equality a x = b blocks. */
  linIneq?: LinearBlock;
  linEq?: LinearBlock;
  rhoBeg?: number;
  rhoEnd?: number;
  npt?: number;
  maxEvals?: number;
  target?: number;
  scale?: boolean;
  pythonPath?: string;
  bridgePath?: string;
}

export interface ForeignResult {
  x: number[];
  fun: number;
  nfev: number;
  status: string;
  message: string;
  success: boolean;
  warnings: string[];
  constraintViolation: number;
}

const METHODS = new Set(["auto", "cobyla", "uobyqa", "newuoa", "bobyqa", "lincoa"]);

function defaultBridgePath(): string {
  // Compiled layout ships bridge.py next to index.js; the source layout
  // keeps it in src/.
  const local = path.join(__dirname, "bridge.py");
  if (require("fs").existsSync(local)) return local;
  return path.join(__dirname, "..", "src", "bridge.py");
}

function decodeNumber(v: number | string): number {
  if (typeof v === "number") return v;
  if (v === "NaN") return NaN;
  if (v === "Infinity") return Infinity;
  if (v === "-Infinity") return -Infinity;
  return Number(v);
}

function encodeNumber(v: number): number | string {
  if (Number.isNaN(v)) return "NaN";
  if (v === Infinity) return "Infinity";
  if (v === -Infinity) return "-Infinity";
  return v;
}

function validateInputs(fun: Objective, x0: number[], options: MinimizeOptions): void {
  if (typeof fun !== "function") {
    throw new TypeError("fun must be callable");
  }
  if (!Array.isArray(x0) || x0.length === 0 || !x0.every((v) => typeof v === "number" && Number.isFinite(v))) {
    throw new TypeError("x0 must be a nonempty array of finite numbers");
  }
  if (options.method !== undefined && !METHODS.has(options.method)) {
    throw new TypeError(`unknown method ${String(options.method)}`);
  }
  if (options.bounds !== undefined && options.bounds.length !== x0.length) {
    throw new TypeError("bounds must have one [lower, upper] pair per variable");
  }
}

function normalizeConstraints(raw: Constraint | Constraint[] | undefined): {
  ineq: Array<(x: number[]) => number[]>;
  eq: Array<(x: number[]) => number[]>;
} {
  const list = raw === undefined ? [] : Array.isArray(raw) ? raw : [raw];
  const ineq: Array<(x: number[]) => number[]> = [];
  const eq: Array<(x: number[]) => number[]> = [];
  for (const con of list) {
    if (!con || (con.type !== "ineq" && con.type !== "eq") || typeof con.fun !== "function") {
      throw new TypeError("constraints must be {type: 'ineq'|'eq', fun} objects");
    }
    const evalVec = (x: number[]): number[] => {
      const out = con.fun(x.slice());
      return Array.isArray(out) ? out.map(Number) : [Number(out)];
    };
    if (con.type === "ineq") {
      // Host convention fun(x) >= 0 maps to the solver's c(x) <= 0 rows.
      ineq.push((x) => evalVec(x).map((v) => -v));
    } else {
      eq.push((x) => evalVec(x));
    }
  }
  return { ineq, eq };
}

/** Solve min fun(x) subject to the declared bounds and constraints. */
export function minimizeCompatible(
  fun: Objective,
  x0: number[],
  options: MinimizeOptions = {},
): Promise<ForeignResult> {
  validateInputs(fun, x0, options);
  const cons = normalizeConstraints(options.constraints);

  const lower = options.bounds?.map((p) => p[0]) ?? null;
  const upper = options.bounds?.map((p) => p[1]) ?? null;
  let method: string | null = options.method ?? null;
  if (method === "auto") method = null;

  const config = {
    x0: x0.slice(),
    method,
    lower,
    upper,
    linIneq: options.linIneq ?? null,
    linEq: options.linEq ?? null,
    hasNlIneq: cons.ineq.length > 0,
    hasNlEq: cons.eq.length > 0,
    scale: options.scale ?? false,
    options: {
      rhoBeg: options.rhoBeg ?? null,
      rhoEnd: options.rhoEnd ?? null,
      npt: options.npt ?? null,
      maxEvals: options.maxEvals ?? null,
      target: options.target ?? null,
    },
  };

  const python = options.pythonPath ?? "python3";
  const bridge = options.bridgePath ?? defaultBridgePath();

  return new Promise<ForeignResult>((resolve, reject) => {
    let child: ChildProcessWithoutNullStreams;
    try {
      child = spawn(python, [bridge], { stdio: ["pipe", "pipe", "pipe"] });
    } catch (err) {
      reject(err);
      return;
    }
    let settled = false;
    let stderrText = "";
    child.stderr.on("data", (chunk) => {
      stderrText += String(chunk);
    });
    const rl = readline.createInterface({ input: child.stdout });

    const finish = (fn: () => void) => {
      if (settled) return;
      settled = true;
      rl.close();
      child.kill();
      fn();
    };

    const send = (obj: unknown) => {
      child.stdin.write(JSON.stringify(obj) + "\n");
    };

    rl.on("line", (line) => {
      let msg: any;
      try {
        msg = JSON.parse(line);
      } catch (err) {
        finish(() => reject(new Error(`bridge sent invalid JSON: ${line}`)));
        return;
      }
      if (msg.type === "eval") {
        let reply: Record<string, unknown>;
        try {
          const value = fun((msg.x as number[]).slice());
          reply = { value: encodeNumber(Number(value)) };
        } catch (err) {
          reply = { error: String(err) };
        }
        send(reply);
      } else if (msg.type === "evalCon") {
        const fns = msg.kind === "ineq" ? cons.ineq : cons.eq;
        try {
          const values: number[] = [];
          for (const fn of fns) values.push(...fn(msg.x as number[]));
          send({ values: values.map(encodeNumber) });
        } catch (err) {
          send({ error: String(err) });
        }
      } else if (msg.type === "result") {
        finish(() =>
          resolve({
            x: (msg.x as Array<number | string>).map(decodeNumber),
            fun: decodeNumber(msg.fun),
            nfev: msg.nfev as number,
            status: msg.status as string,
            message: (msg.message as string) ?? "",
            success: Boolean(msg.success),
            warnings: (msg.warnings as string[]) ?? [],
            constraintViolation: decodeNumber(msg.constraintViolation ?? 0),
          }),
        );
      }
    });

    child.on("error", (err) => finish(() => reject(err)));
    child.on("exit", (code) => {
      if (!settled && code !== 0) {
        finish(() => reject(new Error(`bridge exited with code ${code}: ${stderrText}`)));
      } else if (!settled) {
        finish(() => reject(new Error(`bridge exited without a result: ${stderrText}`)));
      }
    });

    send(config);
  });
}

function alias(method: MinimizeOptions["method"]) {
  return (fun: Objective, x0: number[], options: MinimizeOptions = {}) =>
    minimizeCompatible(fun, x0, { ...options, method });
}

export const cobyla = alias("cobyla");
export const uobyqa = alias("uobyqa");
export const newuoa = alias("newuoa");
export const bobyqa = alias("bobyqa");
export const lincoa = alias("lincoa");
