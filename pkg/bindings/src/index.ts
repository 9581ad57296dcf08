/**
 * Buffer-level bindings for the znn compressor.
 *
 * All codec work happens in the compressor CLI itself (spawned per call),
 * so containers produced here are byte-identical to the CLI's output for
 * the same inputs and options: one implementation, one format.
 */

import { runCli, ZnnError } from "./invoke.js";

export { ZnnError } from "./invoke.js";
export { processCache, type CacheAction } from "./cache.js";

export type DtypeName = "fp32" | "bf16" | "fp16" | "opaque";

export interface CompressOptions {
    /** Chunk size in KB (default 256). */
    chunkKb?: number;
    /** Selection mode: model | auto | huffman | lz | stored. */
    mode?: "model" | "auto" | "huffman" | "lz" | "stored";
    threads?: number;
}

const DTYPES: ReadonlySet<string> = new Set(["fp32", "bf16", "fp16", "opaque"]);

/** Compress a contiguous buffer of elements into a .znn container. */
export function compress(
    buffer: Buffer | Uint8Array,
    dtypeName: DtypeName,
    options: CompressOptions = {},
): Buffer {
    if (!DTYPES.has(dtypeName)) {
        throw new ZnnError(`unknown dtype ${String(dtypeName)}`, "usage");
    }
    const args = ["compress", "-", "-o", "-", "--dtype", dtypeName];
    if (options.chunkKb !== undefined) {
        args.push("--chunk-kb", String(options.chunkKb));
    }
    if (options.mode !== undefined) {
        args.push("--mode", options.mode);
    }
    if (options.threads !== undefined) {
        args.push("--threads", String(options.threads));
    }
    return runCli(args, Buffer.from(buffer));
}

/** Restore the original bytes from a .znn container. */
export function decompress(container: Buffer | Uint8Array, threads?: number): Buffer {
    const args = ["decompress", "-", "-o", "-"];
    if (threads !== undefined) {
        args.push("--threads", String(threads));
    }
    return runCli(args, Buffer.from(container));
}
