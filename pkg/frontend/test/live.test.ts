/**
 * Integration against a live review service: a scripted 10-item session is
 * driven through the controller exactly as the UI drives it, then the
 * on-disk mark log is replayed and must reproduce the displayed final ratio.
 */

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ReviewApi, Verdict } from "../src/api.js";
import { ReviewController } from "../src/controller.js";

const PORT = 8400 + (process.pid % 800);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;
let workDir: string;

function writeFixtures(dir: string): void {
  const kbLines = [
    JSON.stringify({ kb_meta: { name: "live", created_at: "", version: "1" } }),
    JSON.stringify({
      pair_id: "p1",
      answer: "这是用于评审的答案文本。",
      questions: ["源问题是什么？"],
      tags: [],
      generated: [],
    }),
  ];
  writeFileSync(join(dir, "kb.jsonl"), kbLines.join("\n") + "\n", "utf-8");

  const runDir = join(dir, "runs", "r10");
  mkdirSync(runDir, { recursive: true });
  const batch = {
    run_id: "r10",
    pair_id: "p1",
    mode: "context_aware",
    requested_count: 10,
    k_per_call: 10,
    provider_id: "mock:live",
    sampling: { temperature: 0.9, top_k: 5, max_tokens: 512 },
    underfilled: false,
    questions: Array.from({ length: 10 }, (_, i) => `候选问法${i}`),
    raw_responses: [],
    failures: [],
  };
  writeFileSync(join(runDir, "batches.jsonl"), JSON.stringify(batch) + "\n", "utf-8");
}

async function waitForHealth(api: ReviewApi, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      await api.health();
      return;
    } catch (err) {
      lastError = err;
      await new Promise((resolve) => setTimeout(resolve, 250));
    }
  }
  throw new Error(`service did not come up on ${BASE}: ${String(lastError)}`);
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "sqgen-ui-live-"));
  writeFixtures(workDir);
  service = spawn(
    "sqgen",
    [
      "review-serve",
      "--kb", join(workDir, "kb.jsonl"),
      "--runs", join(workDir, "runs"),
      "--host", "127.0.0.1",
      "--port", String(PORT),
    ],
    { stdio: "ignore" },
  );
  await waitForHealth(new ReviewApi(BASE));
}, 40_000);

afterAll(() => {
  service?.kill();
});

describe("live review flow", () => {
  it(
    "scripted 10-item session: replayed mark log equals the displayed final ratio",
    async () => {
      const api = new ReviewApi(BASE);
      const session = await api.createSession("r10", "expert-live", 5);
      expect(session.total).toBe(10);

      const controller = new ReviewController(api, session.session_id);
      await controller.loadNext();

      // First card: rapid double keypress, exactly one mark goes through.
      const [first, second] = await Promise.all([
        controller.submit("accept"),
        controller.submit("accept"),
      ]);
      expect([first, second].filter(Boolean)).toHaveLength(1);

      // Remaining nine cards: scripted verdicts (6 more accepts, 3 rejects).
      const script: Verdict[] = [
        "accept", "reject", "accept", "reject",
        "accept", "accept", "reject", "accept", "accept",
      ];
      const positions: number[] = [1];
      for (const verdict of script) {
        expect(controller.state.kind).toBe("card");
        if (controller.state.kind === "card") {
          positions.push(controller.state.card.position);
        }
        const ok = await controller.submit(verdict);
        expect(ok).toBe(true);
      }

      expect(controller.state.kind).toBe("done");
      const displayedRatio = controller.ratio();
      expect(displayedRatio).toBe(0.7); // 7 accepts of 10

      // Item order matches the service queue: positions strictly ascend.
      expect(positions).toEqual([1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
      expect(new Set(controller.seenItemIds).size).toBe(10);

      // Replay the durable mark log and recompute the ratio independently.
      const logPath = join(workDir, "runs", "r10", "marks.jsonl");
      const records = readFileSync(logPath, "utf-8")
        .split("\n")
        .filter((line) => line.trim())
        .map((line) => JSON.parse(line) as { session_id: string; verdict: string; item_id: string })
        .filter((record) => record.session_id === session.session_id);

      expect(records).toHaveLength(10); // double keypress produced exactly one mark
      const uniqueItems = new Set(records.map((record) => record.item_id));
      expect(uniqueItems.size).toBe(10);
      const accepted = records.filter((record) => record.verdict === "accept").length;
      expect(accepted / records.length).toBe(displayedRatio);

      // The service agrees with the replay and the UI.
      const finalStats = await api.stats(session.session_id);
      expect(finalStats.acceptance_ratio).toBe(displayedRatio);
      expect(finalStats.marked).toBe(10);
      expect(finalStats.remaining).toBe(0);
    },
    60_000,
  );

  it(
    "double mark against the live service is rejected with 409 and state preserved",
    async () => {
      const api = new ReviewApi(BASE);
      const session = await api.createSession("r10", "expert-dup", 1);
      const next = await api.nextItem(session.session_id);
      expect(next.done).toBe(false);
      if (!next.done) {
        await api.submitMark(session.session_id, next.item.item_id, "accept");
        await expect(
          api.submitMark(session.session_id, next.item.item_id, "reject"),
        ).rejects.toMatchObject({ status: 409 });
        const stats = await api.stats(session.session_id);
        expect(stats.marked).toBe(1);
        expect(stats.accepted).toBe(1);
      }
    },
    60_000,
  );
});
