import { spawnSync } from "node:child_process";

/** Exit-code taxonomy of the compressor CLI. */
export class ZnnError extends Error {
    constructor(message: string, readonly kind: "usage" | "data" | "io") {
        super(message);
        this.name = "ZnnError";
    }
}

/** Python interpreter hosting the compressor; override via ZNN_PYTHON. */
export function pythonExecutable(): string {
    return process.env.ZNN_PYTHON ?? "python3";
}

const KIND_BY_CODE: Record<number, "usage" | "data" | "io"> = {
    1: "usage",
    2: "data",
    3: "io",
};

/**
 * Run one compressor CLI command, feeding stdin and capturing stdout as a
 * Buffer.  Non-zero exit codes become typed ZnnErrors.
 */
export function runCli(args: string[], input?: Buffer): Buffer {
    const res = spawnSync(pythonExecutable(), ["-m", "znn", ...args], {
        input,
        maxBuffer: 1 << 30,
    });
    if (res.error) {
        throw new ZnnError(`failed to launch compressor: ${res.error.message}`, "io");
    }
    if (res.status !== 0) {
        const detail = res.stderr?.toString("utf8").trim() || `exit code ${res.status}`;
        throw new ZnnError(detail, KIND_BY_CODE[res.status ?? 1] ?? "data");
    }
    return res.stdout;
}
