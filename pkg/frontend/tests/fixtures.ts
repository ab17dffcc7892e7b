import { readFileSync } from "node:fs";

export function fixtureJson<T>(name: string): T {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as T;
}

export function fixtureBytes(name: string): ArrayBuffer {
  const buf = readFileSync(new URL(`./fixtures/${name}`, import.meta.url));
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength) as ArrayBuffer;
}

export interface RayCase {
  name: string;
  camera: { position: number[]; look_at: number[]; up: number[]; vfov_deg: number };
  width: number;
  height: number;
  basis: { forward: number[]; right: number[]; true_up: number[] };
  dirs: number[][];
}

export interface Recording {
  method: string;
  path: string;
  request: unknown;
  status: number;
  body: unknown;
}
