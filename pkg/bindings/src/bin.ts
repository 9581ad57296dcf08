#!/usr/bin/env node
/** znn-cache <dir>: decompress every .znn in a model cache, fix links. */

import { processCache } from "./cache.js";

async function main(): Promise<number> {
    const dir = process.argv[2];
    if (!dir) {
        process.stderr.write("usage: znn-cache <cache-dir>\n");
        return 1;
    }
    const actions = await processCache(dir);
    for (const a of actions) {
        process.stdout.write(JSON.stringify(a) + "\n");
    }
    return actions.some((a) => a.kind === "error") ? 1 : 0;
}

main().then((code) => {
    process.exitCode = code;
});
