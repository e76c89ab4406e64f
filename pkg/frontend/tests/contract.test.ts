// Role x step contract: a button the UI enables must be a click the
// gateway accepts (enabled => 2xx), for every role and every step.

import { afterAll, beforeAll, beforeEach, describe, expect, it } from "vitest";

import { createClient, GatewayError } from "../src/apiClient.js";
import { enablementMatrix, nextActionButton } from "../src/workflow.js";
import type { InstanceView, Role, WorkflowDefinition } from "../src/types.js";
import type { Session } from "../src/session.js";
import { loadCorpus, startFixtureServer, type FixtureServer } from "../server/fixtureServer.js";

let server: FixtureServer;
const corpus = loadCorpus();
const definition = corpus.definition as WorkflowDefinition;

beforeAll(async () => {
  server = await startFixtureServer();
});

afterAll(async () => {
  await server.close();
});

beforeEach(async () => {
  await fetch(`${server.url}/__fixture/reset`, { method: "POST" });
});

function sessionFor(role: string): Session {
  const info = corpus.sessions[`fixture-token-${role}`];
  return {
    token: `fixture-token-${role}`,
    userId: info.user_id,
    roles: info.roles as Role[],
    expiresAt: Date.now() / 1000 + 3600,
  };
}

const ROLES = ["agent", "farmer", "fleet_manager", "operator", "supervisor",
               "financier", "admin"] as const;

describe("role x step contract", () => {
  it("enabled buttons always yield 2xx on click", async () => {
    let enabledClicks = 0;
    for (const role of ROLES) {
      const session = sessionFor(role);
      const client = createClient(server.url, () => session.token);
      for (const [stage, instanceId] of Object.entries(corpus.parked_instances)) {
        await fetch(`${server.url}/__fixture/reset`, { method: "POST" });
        const instance = await client.get<InstanceView>(`/instances/${instanceId}`);
        const button = nextActionButton(definition, instance, session);
        if (stage === "completed") {
          expect(button).toBeNull();
          continue;
        }
        expect(button).not.toBeNull();
        if (!button!.enabled) continue;
        const payload = corpus.action_payloads[button!.action] ?? {};
        const updated = await client.post<InstanceView>(
          `/instances/${instanceId}/actions`,
          { action: button!.action, payload });
        enabledClicks += 1;
        expect(updated.current_step_index).toBe(instance.current_step_index + 1);
        expect(updated.history.at(-1)!.tx_id).toBeTruthy();
      }
    }
    // admin holds no step role, so exactly one role matches each parked step
    expect(enabledClicks).toBe(3);
  });

  it("disabled buttons correspond to gateway rejections", async () => {
    for (const role of ROLES) {
      const session = sessionFor(role);
      const client = createClient(server.url, () => session.token);
      for (const [stage, instanceId] of Object.entries(corpus.parked_instances)) {
        if (stage === "completed") continue;
        await fetch(`${server.url}/__fixture/reset`, { method: "POST" });
        const instance = await client.get<InstanceView>(`/instances/${instanceId}`);
        const button = nextActionButton(definition, instance, session)!;
        if (button.enabled) continue;
        const payload = corpus.action_payloads[button.action] ?? {};
        await expect(client.post(`/instances/${instanceId}/actions`,
                                 { action: button.action, payload }))
          .rejects.toMatchObject({ status: 403 });
      }
    }
  });

  it("enablement matrix matches step roles exactly", () => {
    for (const role of ROLES) {
      const matrix = enablementMatrix(definition, sessionFor(role));
      for (const step of definition.steps) {
        expect(matrix.get(step.action_name)).toBe(
          step.required_role === role);
      }
    }
  });

  it("out-of-order clicks surface as 409, never as success", async () => {
    const session = sessionFor("supervisor");
    const client = createClient(server.url, () => session.token);
    const atSchedule = corpus.parked_instances["at_schedule"];
    try {
      await client.post(`/instances/${atSchedule}/actions`, {
        action: "confirm_service",
        payload: corpus.action_payloads["confirm_service"],
      });
      throw new Error("should have rejected");
    } catch (error) {
      expect(error).toBeInstanceOf(GatewayError);
      expect((error as GatewayError).status).toBe(409);
    }
  });
});
