#!/usr/bin/env node
/**
 * Exporter command line.
 *
 *   ssem-exporter export --checkpoint m.safetensors --manifest map.json \
 *       --dsp dsp.json --out model.ssem [--sidecar model.json]
 *   ssem-exporter make-toy --seed 7 --dims 32,16,16,16 [--frame 128] \
 *       [--rate 16000] --out toy.ssem [--sidecar toy.json]
 */
import * as fs from "fs";

import { exportCheckpoint } from "./export";
import { parseManifest } from "./manifest";
import { DspConfig } from "./model";
import { readSafetensors } from "./safetensors";
import { makeToyModel } from "./toy";

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`expected --flag value pairs, got '${key}'`);
    }
    out.set(key.slice(2), argv[i + 1]);
  }
  return out;
}

function need(args: Map<string, string>, key: string): string {
  const v = args.get(key);
  if (v === undefined) throw new Error(`missing required --${key}`);
  return v;
}

function cmdExport(args: Map<string, string>): void {
  const ckpt = readSafetensors(fs.readFileSync(need(args, "checkpoint")));
  const manifest = parseManifest(JSON.parse(fs.readFileSync(need(args, "manifest"), "utf-8")));
  const dsp = JSON.parse(fs.readFileSync(need(args, "dsp"), "utf-8")) as DspConfig;
  const outPath = need(args, "out");
  const result = exportCheckpoint(ckpt, manifest, dsp);
  fs.writeFileSync(outPath, result.container);
  const sidecarPath = args.get("sidecar") ?? outPath.replace(/\.ssem$/, "") + ".json";
  fs.writeFileSync(sidecarPath, JSON.stringify(result.sidecar, null, 2) + "\n");
  console.log(`wrote ${outPath} (${result.container.length} bytes), sidecar ${sidecarPath}`);
  if (result.sidecar.saturated_weights > 0) {
    console.warn(`saturated weights total: ${result.sidecar.saturated_weights}`);
  }
}

function cmdMakeToy(args: Map<string, string>): void {
  const dims = need(args, "dims").split(",").map(Number);
  if (dims.length !== 4 || dims.some((d) => !Number.isInteger(d) || d <= 0)) {
    throw new Error("--dims wants four positive integers: mel,h1,h2,d1");
  }
  const outPath = need(args, "out");
  const result = makeToyModel({
    seed: Number(args.get("seed") ?? "0"),
    dims: dims as [number, number, number, number],
    frame_size: args.has("frame") ? Number(args.get("frame")) : undefined,
    sample_rate: args.has("rate") ? Number(args.get("rate")) : undefined,
  });
  fs.writeFileSync(outPath, result.container);
  const sidecarPath = args.get("sidecar") ?? outPath.replace(/\.ssem$/, "") + ".json";
  fs.writeFileSync(sidecarPath, JSON.stringify(result.sidecar, null, 2) + "\n");
  console.log(`wrote ${outPath} (${result.container.length} bytes), sidecar ${sidecarPath}`);
}

function main(): number {
  const [cmd, ...rest] = process.argv.slice(2);
  try {
    if (cmd === "export") {
      cmdExport(parseArgs(rest));
    } else if (cmd === "make-toy") {
      cmdMakeToy(parseArgs(rest));
    } else {
      console.error("usage: ssem-exporter <export|make-toy> --flag value ...");
      return 1;
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

process.exit(main());
