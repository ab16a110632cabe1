import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { describe, expect, it } from "vitest";

import { exportCheckpoint } from "../src/export";
import { parseManifest, Manifest } from "../src/manifest";
import { DspConfig, binsOf } from "../src/model";
import { CheckpointTensor, readSafetensors, writeSafetensors } from "../src/safetensors";
import { melFilterbank } from "../src/toy";

const DSP: DspConfig = { sample_rate: 16000, frame_size: 128, hop_size: 64,
                         mel_bins: 8, power_exponent: 0.3 };
const H = 4; // hidden units in both recurrent layers
const D1 = 4;

function tmpdir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "ssem-export-"));
}

/** Framework-style checkpoint: packed 4H x I gate matrices (i, f, c, o). */
function makeCheckpoint(fill = 0.01): Map<string, CheckpointTensor> {
  const t = new Map<string, CheckpointTensor>();
  const seq = (n: number, scale: number) =>
    new Float64Array(Array.from({ length: n }, (_, i) => ((i % 11) - 5) * scale + fill));
  t.set("rnn1.weight_ih", { shape: [4 * H, DSP.mel_bins], data: seq(4 * H * DSP.mel_bins, 0.02) });
  t.set("rnn1.weight_hh", { shape: [4 * H, H], data: seq(4 * H * H, 0.03) });
  t.set("rnn1.bias", { shape: [4 * H], data: seq(4 * H, 0.01) });
  t.set("rnn2.weight_ih", { shape: [4 * H, H], data: seq(4 * H * H, 0.02) });
  t.set("rnn2.weight_hh", { shape: [4 * H, H], data: seq(4 * H * H, 0.03) });
  t.set("rnn2.bias", { shape: [4 * H], data: seq(4 * H, 0.01) });
  // stored input-major to exercise the transpose path
  t.set("fc1.weight_t", { shape: [H, D1], data: seq(H * D1, 0.04) });
  t.set("fc1.bias", { shape: [D1], data: seq(D1, 0.01) });
  t.set("fc2.weight", { shape: [DSP.mel_bins, D1], data: seq(DSP.mel_bins * D1, 0.05) });
  t.set("fc2.bias", { shape: [DSP.mel_bins], data: seq(DSP.mel_bins, 0.01) });
  t.set("qeq.gain", { shape: [DSP.mel_bins], data: new Float64Array(DSP.mel_bins).fill(1.0) });
  t.set("qeq.bias", { shape: [DSP.mel_bins], data: new Float64Array(DSP.mel_bins).fill(0.0) });
  t.set("mel_fb", { shape: [DSP.mel_bins, binsOf(DSP)], data: melFilterbank(DSP) });
  return t;
}

function gateSlice(gate: number): [number, number] {
  return [gate * H, (gate + 1) * H];
}

function makeManifest(): Manifest {
  // packed gate order in the checkpoint: i, f, c, o
  const slots: Manifest["slots"] = {};
  for (const [src, dst] of [["rnn1", "lstm1"], ["rnn2", "lstm2"]] as const) {
    for (const [g, gateIdx] of [["i", 0], ["f", 1], ["c", 2], ["o", 3]] as const) {
      slots[`${dst}.w_x${g}`] = { tensor: `${src}.weight_ih`, rows: gateSlice(gateIdx) };
      slots[`${dst}.w_h${g}`] = { tensor: `${src}.weight_hh`, rows: gateSlice(gateIdx) };
    }
    slots[`${dst}.b_i`] = { tensor: `${src}.bias`, cols: gateSlice(0) };
    slots[`${dst}.b_f`] = { tensor: `${src}.bias`, cols: gateSlice(1) };
    slots[`${dst}.b_u`] = { tensor: `${src}.bias`, cols: gateSlice(2) };
    slots[`${dst}.b_o`] = { tensor: `${src}.bias`, cols: gateSlice(3) };
  }
  slots["dense1.w"] = { tensor: "fc1.weight_t", transpose: true };
  slots["dense1.b"] = { tensor: "fc1.bias" };
  slots["dense2.w"] = { tensor: "fc2.weight" };
  slots["dense2.b"] = { tensor: "fc2.bias" };
  slots["qeq.gain"] = { tensor: "qeq.gain" };
  slots["qeq.bias"] = { tensor: "qeq.bias" };
  slots["filterbank"] = { tensor: "mel_fb" };
  return parseManifest({ slots });
}

describe("checkpoint export", () => {
  it("survives the safetensors round trip", () => {
    const ckpt = makeCheckpoint();
    const parsed = readSafetensors(writeSafetensors(ckpt));
    expect(parsed.size).toBe(ckpt.size);
    const a = parsed.get("rnn1.weight_ih")!;
    expect(a.shape).toEqual([4 * H, DSP.mel_bins]);
    // f32 storage: values come back through Math.fround
    expect(a.data[5]).toBeCloseTo(ckpt.get("rnn1.weight_ih")!.data[5], 6);
  });

  it("rejects incomplete manifests and bad slices", () => {
    expect(() => parseManifest({ slots: { "lstm1.w_xi": { tensor: "x" } } }))
      .toThrow(/missing slots/);
    const manifest = makeManifest();
    const broken = JSON.parse(JSON.stringify(manifest)) as Manifest;
    broken.slots["lstm1.w_xi"] = { tensor: "rnn1.weight_ih", rows: [0, 999] };
    expect(() => exportCheckpoint(makeCheckpoint(), broken, DSP)).toThrow(/slice/);
  });

  it("round trips into the engine with matching weight hashes", () => {
    const dir = tmpdir();
    const ckpt = readSafetensors(writeSafetensors(makeCheckpoint()));
    const result = exportCheckpoint(ckpt, makeManifest(), DSP);
    const modelPath = path.join(dir, "exported.ssem");
    fs.writeFileSync(modelPath, result.container);

    const info = JSON.parse(execFileSync(
      "melmask", ["inspect", "-m", modelPath, "--json"], { encoding: "utf-8" }));
    expect(info.weight_hash).toBe(result.sidecar.weight_hash);
    expect(info.params).toBe(result.sidecar.param_count);
    expect(info.layers.map((l: { name: string }) => l.name))
      .toEqual(["lstm1", "lstm2", "dense1", "dense2"]);
  }, 120_000);

  it("quantizes a 0.5 weight to code 64 in the written file", () => {
    const dir = tmpdir();
    const ckpt = makeCheckpoint();
    ckpt.get("fc1.weight_t")!.data.fill(0.5);
    const result = exportCheckpoint(readSafetensors(writeSafetensors(ckpt)),
                                    makeManifest(), DSP);
    const modelPath = path.join(dir, "half.ssem");
    fs.writeFileSync(modelPath, result.container);
    const script = [
      "import sys, numpy as np",
      "from melmask import container",
      "m = container.load(sys.argv[1])",
      "codes = np.asarray(m.dense1.w.data)",
      "assert (codes == 64).all(), codes",
      "print('ok')",
    ].join("\n");
    const out = execFileSync("python3", ["-c", script, modelPath], { encoding: "utf-8" });
    expect(out.trim()).toBe("ok");
  }, 120_000);

  it("saturates out-of-range weights with a warning count", () => {
    const ckpt = makeCheckpoint();
    ckpt.get("fc2.weight")!.data[0] = 1.2;
    ckpt.get("fc2.weight")!.data[1] = -2.0;
    const result = exportCheckpoint(readSafetensors(writeSafetensors(ckpt)),
                                    makeManifest(), DSP);
    expect(result.sidecar.saturated_weights).toBe(2);
    expect(result.sidecar.saturated_by_slot["dense2.w"]).toBe(2);
  });

  it("enhances audio through the engine after export", () => {
    const dir = tmpdir();
    const result = exportCheckpoint(readSafetensors(writeSafetensors(makeCheckpoint())),
                                    makeManifest(), DSP);
    const modelPath = path.join(dir, "run.ssem");
    fs.writeFileSync(modelPath, result.container);
    const script = [
      "import sys, numpy as np",
      "from melmask import container",
      "from melmask.engine import enhance",
      "m = container.load(sys.argv[1])",
      "y = enhance(m, np.cos(np.arange(2000) * 0.1) * 0.3)",
      "assert np.all(np.isfinite(y))",
      "print(len(y))",
    ].join("\n");
    const out = execFileSync("python3", ["-c", script, modelPath], { encoding: "utf-8" });
    expect(Number(out.trim())).toBeGreaterThan(0);
  }, 120_000);
});
