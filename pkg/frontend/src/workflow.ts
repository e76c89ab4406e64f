// Instance-detail view model: which action button (if any) a session
// gets, and how gateway rejections map onto view states.
//
// The invariant the contract test pins down: a button is enabled only
// when the gateway would accept the click, so enabled => 2xx.

import { GatewayError, type ApiClient } from "./apiClient.js";
import type { Session } from "./session.js";
import type { InstanceView, Role, Step, WorkflowDefinition } from "./types.js";

export interface ActionButton {
  action: string;
  requiredRole: Role;
  requiredInputs: string[];
  enabled: boolean;
  reason: string | null; // shown as the disabled-state explanation
}

export function currentStep(definition: WorkflowDefinition,
                            instance: InstanceView): Step | null {
  if (instance.status !== "ACTIVE") return null;
  return definition.steps[instance.current_step_index] ?? null;
}

/** The single next-action button for an instance, per session. */
export function nextActionButton(definition: WorkflowDefinition,
                                 instance: InstanceView,
                                 session: Session): ActionButton | null {
  const step = currentStep(definition, instance);
  if (step === null) return null;
  const holdsRole = session.roles.includes(step.required_role);
  return {
    action: step.action_name,
    requiredRole: step.required_role,
    requiredInputs: step.required_inputs,
    enabled: holdsRole,
    reason: holdsRole
      ? null
      : `requires the ${step.required_role} role`,
  };
}

/** Role x step enumeration used by the contract test: for this session,
 * every action name mapped to whether its button would be enabled on an
 * instance currently sitting at that step. */
export function enablementMatrix(definition: WorkflowDefinition,
                                 session: Session): Map<string, boolean> {
  const matrix = new Map<string, boolean>();
  for (const step of definition.steps) {
    matrix.set(step.action_name, session.roles.includes(step.required_role));
  }
  return matrix;
}

export type InstanceViewState =
  | { kind: "ready"; instance: InstanceView }
  | { kind: "denied"; explanation: string }
  | { kind: "stale"; prompt: string }
  | { kind: "error"; message: string };

/** Click handler outcome mapping: 403 renders as a disabled-state
 * explanation, OutOfOrder (409) as a stale-view refresh prompt. */
export async function advanceAction(client: ApiClient, instanceId: string,
                                    action: string,
                                    payload: Record<string, unknown>,
                                    ): Promise<InstanceViewState> {
  try {
    const instance = await client.post<InstanceView>(
      `/instances/${instanceId}/actions`, { action, payload });
    return { kind: "ready", instance };
  } catch (error) {
    if (error instanceof GatewayError) {
      if (error.status === 403) {
        return { kind: "denied", explanation: error.message };
      }
      if (error.status === 409) {
        return {
          kind: "stale",
          prompt: "Another session already advanced this booking - refresh to see the latest state.",
        };
      }
      return { kind: "error", message: `${error.code}: ${error.message}` };
    }
    throw error;
  }
}

export function auditRows(instance: InstanceView): Array<{
  action: string; role: Role; txId: string;
}> {
  const trail = instance.audit_trail ?? instance.history ?? [];
  return trail.map((record) => ({
    action: record.action_name,
    role: record.actor_role,
    txId: record.tx_id,
  }));
}
