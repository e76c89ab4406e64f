// Offline stand-in for the gateway: replays a corpus recorded from the
// real thing and applies the same role/step gating rules to action posts,
// so the dashboard (and its contract tests) behave identically offline.

import { createServer, type IncomingMessage, type Server, type ServerResponse } from "node:http";
import { existsSync, readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

interface SessionInfo {
  user_id: string;
  org_id: string;
  roles: string[];
  role: string;
}

interface CorpusFile {
  sessions: Record<string, SessionInfo>;
  definition: {
    workflow_id: string;
    version: number;
    steps: Array<{
      action_name: string;
      required_role: string;
      required_inputs: string[];
    }>;
  };
  parked_instances: Record<string, string>;
  instance_states: Record<string, { current_step_index: number; status: string }>;
  responses: Record<string, unknown>;
  trio_date: string;
  action_payloads: Record<string, Record<string, unknown>>;
}

const HERE = dirname(fileURLToPath(import.meta.url));
// works both from server/ (vitest, straight TS) and dist/server/ (built)
const DEFAULT_CORPUS = [
  join(HERE, "..", "fixtures", "corpus.json"),
  join(HERE, "..", "..", "fixtures", "corpus.json"),
].find(existsSync) ?? join(HERE, "..", "fixtures", "corpus.json");

export interface FixtureServer {
  port: number;
  url: string;
  close(): Promise<void>;
  reset(): void;
}

interface LiveInstance {
  current_step_index: number;
  status: string;
  extraHistory: Array<Record<string, unknown>>;
}

export function loadCorpus(path: string = DEFAULT_CORPUS): CorpusFile {
  return JSON.parse(readFileSync(path, "utf-8")) as CorpusFile;
}

export async function startFixtureServer(port = 0,
                                         corpusPath: string = DEFAULT_CORPUS
                                         ): Promise<FixtureServer> {
  const corpus = loadCorpus(corpusPath);
  let live: Record<string, LiveInstance> = {};
  let txCounter = 0;

  function resetState(): void {
    live = {};
    for (const [id, state] of Object.entries(corpus.instance_states)) {
      live[id] = {
        current_step_index: state.current_step_index,
        status: state.status,
        extraHistory: [],
      };
    }
    txCounter = 0;
  }
  resetState();

  function sessionOf(req: IncomingMessage): SessionInfo | null {
    const header = req.headers.authorization ?? "";
    if (!header.toLowerCase().startsWith("bearer ")) return null;
    return corpus.sessions[header.slice(7).trim()] ?? null;
  }

  function send(res: ServerResponse, status: number, payload: unknown): void {
    const body = JSON.stringify(payload);
    res.writeHead(status, { "Content-Type": "application/json" });
    res.end(body);
  }

  function deny(res: ServerResponse, status: number, code: string,
                message: string): void {
    send(res, status, { code, message });
  }

  function instanceView(instanceId: string): Record<string, unknown> | null {
    const recorded = corpus.responses[`/instances/${instanceId}`] as
      Record<string, unknown> | undefined;
    const state = live[instanceId];
    if (!recorded || !state) return null;
    const baseHistory = (recorded.history as Array<Record<string, unknown>>) ?? [];
    const history = [...baseHistory, ...state.extraHistory];
    return {
      ...recorded,
      current_step_index: state.current_step_index,
      status: state.status,
      history,
      audit_trail: history,
    };
  }

  function handleAction(instanceId: string, body: Record<string, unknown>,
                        session: SessionInfo, res: ServerResponse): void {
    const state = live[instanceId];
    if (!state) {
      return deny(res, 404, "UNKNOWN_INSTANCE", instanceId);
    }
    if (state.status !== "ACTIVE") {
      return deny(res, 409, "INSTANCE_CLOSED", `instance is ${state.status}`);
    }
    const step = corpus.definition.steps[state.current_step_index];
    const action = body.action as string;
    if (!action) {
      return deny(res, 400, "MISSING_INPUT", "action required");
    }
    if (action !== step.action_name) {
      return deny(res, 409, "OUT_OF_ORDER",
                  `expected '${step.action_name}' at step ${state.current_step_index}`);
    }
    if (!session.roles.includes(step.required_role)) {
      return deny(res, 403, "UNAUTHORIZED",
                  `action requires role '${step.required_role}'`);
    }
    const payload = (body.payload ?? {}) as Record<string, unknown>;
    const missing = step.required_inputs.filter((f) => !(f in payload));
    if (missing.length) {
      return deny(res, 400, "MISSING_INPUT", `payload missing ${missing.join(",")}`);
    }
    txCounter += 1;
    const txId = `fixturetx${String(txCounter).padStart(4, "0")}`.padEnd(64, "0");
    state.extraHistory.push({
      action_name: step.action_name,
      actor_correlation: `corr-${session.user_id}`,
      actor_role: step.required_role,
      timestamp: Date.now() / 1000,
      payload_digest: "f".repeat(64),
      tx_id: txId,
    });
    state.current_step_index += 1;
    if (state.current_step_index >= corpus.definition.steps.length) {
      state.status = "COMPLETED";
    }
    const view = instanceView(instanceId)!;
    view.tx_id = txId;
    send(res, 200, view);
  }

  const gatedGets: Array<{ pattern: RegExp; roles: string[] }> = [
    { pattern: /^\/tractors\/[^/]+\/utilization/,
      roles: ["financier", "fleet_manager", "admin"] },
    { pattern: /^\/clusters/,
      roles: ["agent", "farmer", "fleet_manager", "supervisor", "financier", "admin"] },
  ];

  const server: Server = createServer((req, res) => {
    const url = req.url ?? "/";
    const method = req.method ?? "GET";

    if (method === "POST" && url === "/__fixture/reset") {
      resetState();
      return send(res, 200, { reset: true });
    }
    if (url === "/healthz") {
      return send(res, 200, corpus.responses["/healthz"]);
    }

    const session = sessionOf(req);
    if (session === null) {
      return deny(res, 403, "UNAUTHORIZED", "missing bearer token");
    }

    if (method === "GET") {
      for (const gate of gatedGets) {
        if (gate.pattern.test(url) && !gate.roles.some(
            (role) => session.roles.includes(role))) {
          return deny(res, 403, "UNAUTHORIZED", "role may not read this");
        }
      }
      const instanceMatch = url.match(/^\/instances\/([^/?]+)$/);
      if (instanceMatch) {
        const view = instanceView(instanceMatch[1]);
        if (view) return send(res, 200, view);
        return deny(res, 404, "UNKNOWN_INSTANCE", instanceMatch[1]);
      }
      if (url in corpus.responses) {
        return send(res, 200, corpus.responses[url]);
      }
      return deny(res, 404, "UNKNOWN_ROUTE", url);
    }

    if (method === "POST") {
      let raw = "";
      req.on("data", (chunk) => { raw += chunk; });
      req.on("end", () => {
        let body: Record<string, unknown> = {};
        try {
          body = raw ? JSON.parse(raw) : {};
        } catch {
          return deny(res, 400, "BAD_JSON", "unparseable body");
        }
        const actionMatch = url.match(/^\/instances\/([^/?]+)\/actions$/);
        if (actionMatch) {
          return handleAction(actionMatch[1], body, session, res);
        }
        if (url === "/plans/assign") {
          const date = (body.date as string) ?? corpus.trio_date;
          const key = `POST /plans/assign ${date}`;
          if (key in corpus.responses) {
            return send(res, 200, corpus.responses[key]);
          }
          return send(res, 200, {
            clusters: { clusters: [], params: {} },
            assignment: { assignments: [], unmatched_cluster_ids: [],
                          total_cost: 0 },
          });
        }
        return deny(res, 404, "UNKNOWN_ROUTE", url);
      });
      return;
    }
    deny(res, 405, "METHOD_NOT_ALLOWED", method);
  });

  await new Promise<void>((resolve) => server.listen(port, "127.0.0.1", resolve));
  const address = server.address();
  const boundPort = typeof address === "object" && address ? address.port : port;
  return {
    port: boundPort,
    url: `http://127.0.0.1:${boundPort}`,
    close: () => new Promise<void>((resolve, reject) =>
      server.close((err) => (err ? reject(err) : resolve()))),
    reset: resetState,
  };
}
