/**
 * Deterministic 64-bit primitives mirroring the engine exactly:
 * a splitmix64 stream for in-game randomness and FNV-1a for state digests.
 * All arithmetic is BigInt modulo 2^64.
 */

export const MASK64 = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;

export function mix64(state: bigint): bigint {
  let z = state & MASK64;
  z = ((z ^ (z >> 30n)) * MIX1) & MASK64;
  z = ((z ^ (z >> 27n)) * MIX2) & MASK64;
  return (z ^ (z >> 31n)) & MASK64;
}

export function nextState(state: bigint): bigint {
  return (state + GOLDEN) & MASK64;
}

export function fnv1a(data: Uint8Array, h: bigint = FNV_OFFSET): bigint {
  for (const b of data) {
    h ^= BigInt(b);
    h = (h * FNV_PRIME) & MASK64;
  }
  return h;
}

const encoder = new TextEncoder();

export function fnv1aText(text: string): bigint {
  return fnv1a(encoder.encode(text));
}

export function toHex16(value: bigint): string {
  return (value & MASK64).toString(16).padStart(16, "0");
}
