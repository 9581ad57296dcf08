/**
 * Model-hub cache hook: transparently decompress downloaded containers.
 *
 * Walks a local cache directory (the blobs+snapshots symlink layout used
 * by model hubs, but any tree works), decompresses every `*.znn` file
 * beside its target name, re-points symlinks that referenced the
 * compressed file, and removes the `.znn` afterwards.
 *
 * Crash safety: output is written to a temp file and renamed into place,
 * and the compressed source is only unlinked after its replacement is
 * fully written, checksum-verified (by the decompressor) and fsynced.
 * Interrupting at any point leaves either the compressed or the
 * decompressed file intact, and a re-run converges (idempotent: a clean
 * cache produces an empty action log).
 */

import { promises as fs } from "node:fs";
import * as path from "node:path";

import { runCli, ZnnError } from "./invoke.js";

export interface CacheAction {
    kind: "decompressed" | "relinked" | "removed" | "error";
    path: string;
    detail?: string;
}

async function walk(dir: string, files: string[], links: string[]): Promise<void> {
    let entries;
    try {
        entries = await fs.readdir(dir, { withFileTypes: true });
    } catch {
        return; // unknown layout or permission hole: degrade to no-op
    }
    for (const e of entries) {
        const p = path.join(dir, e.name);
        if (e.isSymbolicLink()) {
            links.push(p);
        } else if (e.isDirectory()) {
            await walk(p, files, links);
        } else if (e.isFile()) {
            files.push(p);
        }
    }
}

async function fsyncFile(p: string): Promise<void> {
    const fh = await fs.open(p, "r");
    try {
        await fh.sync();
    } finally {
        await fh.close();
    }
}

async function resolvesTo(linkPath: string, target: string): Promise<string | null> {
    try {
        const text = await fs.readlink(linkPath);
        const resolved = path.resolve(path.dirname(linkPath), text);
        return resolved === path.resolve(target) ? text : null;
    } catch {
        return null;
    }
}

/** Atomically replace a symlink's target text. */
async function relink(linkPath: string, newText: string): Promise<void> {
    const tmp = `${linkPath}.tmp-${process.pid}-${Date.now()}`;
    await fs.symlink(newText, tmp);
    await fs.rename(tmp, linkPath);
}

export async function processCache(cacheDir: string): Promise<CacheAction[]> {
    const actions: CacheAction[] = [];
    const files: string[] = [];
    const links: string[] = [];
    await walk(cacheDir, files, links);

    for (const znnPath of files.filter((f) => f.endsWith(".znn"))) {
        const target = znnPath.slice(0, -".znn".length);
        const tmp = `${target}.tmp-${process.pid}-${Date.now()}`;
        try {
            runCli(["decompress", znnPath, "-o", tmp]);
            await fsyncFile(tmp);
            await fs.rename(tmp, target);
            actions.push({ kind: "decompressed", path: target });

            for (const linkPath of links) {
                const text = await resolvesTo(linkPath, znnPath);
                if (text !== null) {
                    const newText = text.endsWith(".znn")
                        ? text.slice(0, -".znn".length)
                        : path.relative(path.dirname(linkPath), target);
                    await relink(linkPath, newText);
                    actions.push({ kind: "relinked", path: linkPath, detail: newText });
                }
            }

            await fs.unlink(znnPath);
            actions.push({ kind: "removed", path: znnPath });
        } catch (err) {
            await fs.rm(tmp, { force: true });
            const detail = err instanceof ZnnError ? err.message : String(err);
            actions.push({ kind: "error", path: znnPath, detail });
        }
    }
    return actions;
}
