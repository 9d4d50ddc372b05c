import { execFile } from "child_process";
import * as path from "path";
import { promisify } from "util";
import { describe, expect, it } from "vitest";

import {
  bobyqa,
  cobyla,
  lincoa,
  minimizeCompatible,
  newuoa,
  uobyqa,
  type Constraint,
  type MinimizeOptions,
} from "../src/index";

const BRIDGE = path.join(__dirname, "..", "src", "bridge.py");
const RUNNER = path.join(__dirname, "direct_runner.py");
const execFileAsync = promisify(execFile);

const withBridge = (o: MinimizeOptions = {}): MinimizeOptions => ({
  ...o,
  bridgePath: BRIDGE,
});

describe("minimizeCompatible basics", () => {
  it("solves the sphere function", async () => {
    const res = await minimizeCompatible(
      (x) => x.reduce((s, v) => s + v * v, 0),
      [1, 1, 1],
      withBridge(),
    );
    expect(res.success).toBe(true);
    expect(Math.abs(res.fun)).toBeLessThan(1e-6);
    for (const v of res.x) expect(Math.abs(v)).toBeLessThan(1e-3);
    expect(res.nfev).toBeGreaterThan(0);
  });

  it("falls back with a warning when the requested solver is incapable", async () => {
    const cons: Constraint = { type: "ineq", fun: (x) => 1 - x[0] };
    const res = await minimizeCompatible(
      (x) => x[0] * x[0] + x[1] * x[1],
      [0.5, 0.5],
      withBridge({ method: "uobyqa", constraints: cons }),
    );
    expect(res.success).toBe(true);
    expect(res.warnings.length).toBeGreaterThan(0);
    expect(res.warnings.join(" ")).toContain("uobyqa");
  });

  it("reports success=false and nfev=3 when the callback throws on call 3", async () => {
    let calls = 0;
    const res = await minimizeCompatible(
      (x) => {
        calls += 1;
        if (calls === 3) throw new Error("synthetic failure");
        return x[0] * x[0];
      },
      [1, 1],
      withBridge(),
    );
    expect(res.success).toBe(false);
    expect(res.status).toBe("callback-error");
    expect(res.nfev).toBe(3);
    expect(calls).toBe(3);
  });

  it("tolerates NaN-returning callbacks through the barrier", async () => {
    let calls = 0;
    const f0 = 2 * 2 + (-1) * (-1);
    const res = await minimizeCompatible(
      (x) => {
        calls += 1;
        if (calls % 7 === 3) return NaN;
        return x[0] * x[0] + x[1] * x[1];
      },
      [2, -1],
      withBridge({ maxEvals: 300 }),
    );
    // The run must finish cleanly and make progress despite the failures;
    // a periodically poisoned objective does not owe full precision.
    expect(res.success).toBe(true);
    expect(Number.isFinite(res.fun)).toBe(true);
    expect(res.fun).toBeLessThan(f0);
  });

  it("rejects malformed inputs before any solver work", async () => {
    expect(() =>
      minimizeCompatible(123 as unknown as (x: number[]) => number, [1], withBridge()),
    ).toThrow(TypeError);
    expect(() => minimizeCompatible((x) => x[0], [], withBridge())).toThrow(TypeError);
    expect(() =>
      minimizeCompatible((x) => x[0], [1], withBridge({ method: "simplex" as never })),
    ).toThrow(TypeError);
    expect(() =>
      minimizeCompatible((x) => x[0], [1, 2], withBridge({ bounds: [[0, 1]] })),
    ).toThrow(TypeError);
  });

  it("per-solver aliases dispatch to their drivers", async () => {
    const sphere = (x: number[]) => x.reduce((s, v) => s + v * v, 0);
    const viaNewuoa = await newuoa(sphere, [1, 1, 1], withBridge());
    expect(viaNewuoa.success).toBe(true);
    const viaUobyqa = await uobyqa(sphere, [1, 1], withBridge());
    expect(viaUobyqa.success).toBe(true);
    const viaCobyla = await cobyla(sphere, [1, 1], withBridge());
    expect(viaCobyla.success).toBe(true);
    const viaBobyqa = await bobyqa(sphere, [0.5, 0.5], withBridge({
      bounds: [[0, 1], [0, 1]],
    }));
    expect(viaBobyqa.success).toBe(true);
    const viaLincoa = await lincoa(sphere, [0.5, 0.5], withBridge({
      linIneq: { a: [[1, 1]], b: [2] },
    }));
    expect(viaLincoa.success).toBe(true);
  });

  it("respects bound constraints in the result", async () => {
    const res = await bobyqa(
      (x) => {
        const d0 = x[0] - 2.0;
        const d1 = x[1] + 2.0;
        return d0 * d0 + d1 * d1;
      },
      [0.5, 0.5],
      withBridge({ bounds: [[0, 1], [0, 1]] }),
    );
    expect(res.success).toBe(true);
    expect(res.x[0]).toBeGreaterThanOrEqual(-1e-12);
    expect(res.x[0]).toBeLessThanOrEqual(1 + 1e-12);
    expect(Math.abs(res.x[0] - 1)).toBeLessThan(1e-5);
    expect(Math.abs(res.x[1])).toBeLessThan(1e-5);
  });
});

// ---------------------------------------------------------------------
// Numerical parity: the binding must agree bitwise with direct library
// calls on ten fixed problems (objectives mirrored operation for
// operation on both sides of the boundary).
// ---------------------------------------------------------------------

type Spec = {
  id: string;
  fn: (x: number[]) => number;
  x0: number[];
  options: MinimizeOptions;
};

const seq = (fn: (i: number) => number, n: number): number[] =>
  Array.from({ length: n }, (_, i) => fn(i));

const PARITY: Spec[] = [
  {
    id: "sphere3",
    fn: (x) => {
      let s = 0.0;
      for (let i = 0; i < 3; i++) s += x[i] * x[i];
      return s;
    },
    x0: [1, 2, 3],
    options: {},
  },
  {
    id: "shifted4",
    fn: (x) => {
      let s = 0.0;
      for (let i = 0; i < 4; i++) {
        const d = x[i] - 0.5;
        s += d * d;
      }
      return s;
    },
    x0: [0, 0, 0, 0],
    options: { method: "newuoa" },
  },
  {
    id: "cross2",
    fn: (x) => x[0] * x[0] + 4.0 * (x[1] * x[1]) + x[0] * x[1],
    x0: [1, 1],
    options: { method: "newuoa" },
  },
  {
    id: "rosen2",
    fn: (x) => {
      const a = x[1] - x[0] * x[0];
      const b = 1.0 - x[0];
      return 100.0 * (a * a) + b * b;
    },
    x0: [-1.2, 1],
    options: { method: "newuoa" },
  },
  {
    id: "quartic2",
    fn: (x) => {
      let s = 0.0;
      for (let i = 0; i < 2; i++) {
        const a = x[i] * x[i];
        s += a * a;
      }
      return s;
    },
    x0: [1.5, -2],
    options: { method: "uobyqa" },
  },
  {
    id: "box2",
    fn: (x) => {
      const d0 = x[0] - 2.0;
      const d1 = x[1] + 2.0;
      return d0 * d0 + d1 * d1;
    },
    x0: [0.5, 0.5],
    options: { method: "bobyqa", bounds: [[0, 1], [0, 1]] },
  },
  {
    id: "lin2",
    fn: (x) => {
      const d0 = x[0] - 1.0;
      const d1 = x[1] - 2.0;
      return d0 * d0 + d1 * d1;
    },
    x0: [0, 0],
    options: { method: "lincoa", linIneq: { a: [[1, 1]], b: [2] } },
  },
  {
    id: "cob2",
    fn: (x) => -x[0] - 2.0 * x[1],
    x0: [0.25, 0.25],
    options: {
      method: "cobyla",
      bounds: [[0, 1], [0, 1]],
      constraints: { type: "ineq", fun: (x) => 2.0 - x[0] - x[1] },
    },
  },
  {
    id: "trid3",
    fn: (x) => {
      let s = 0.0;
      for (let i = 0; i < 3; i++) {
        const d = x[i] - 1.0;
        s += d * d;
      }
      s -= x[0] * x[1];
      s -= x[1] * x[2];
      return s;
    },
    x0: [0, 0, 0],
    options: { method: "uobyqa" },
  },
  {
    id: "auto9",
    fn: (x) => {
      let s = 0.0;
      for (let i = 0; i < 9; i++) s += (i + 1.0) * (x[i] * x[i]);
      return s;
    },
    x0: seq(() => 1.0, 9),
    options: {},
  },
];

describe("binding parity with direct library calls", () => {
  for (const spec of PARITY) {
    it(`matches bitwise on ${spec.id}`, async () => {
      const viaBinding = await minimizeCompatible(
        spec.fn,
        spec.x0,
        withBridge(spec.options),
      );
      const { stdout } = await execFileAsync("python3", [RUNNER, spec.id]);
      const direct = JSON.parse(stdout) as {
        x: number[];
        fun: number;
        nfev: number;
        status: string;
      };
      expect(viaBinding.status).toBe(direct.status);
      expect(viaBinding.nfev).toBe(direct.nfev);
      expect(viaBinding.fun).toBe(direct.fun);
      expect(viaBinding.x.length).toBe(direct.x.length);
      for (let i = 0; i < direct.x.length; i++) {
        expect(viaBinding.x[i]).toBe(direct.x[i]);
      }
    });
  }
});
