// Browser shell: role-driven navigation over the view models.  All data
// flows through the gateway client; no module talks to anything else.

import { createClient, GatewayError, type ApiClient } from "./apiClient.js";
import { buildClusterView } from "./clusters.js";
import { renderActionButton, renderAuditTrail, renderBookingList,
         renderClusterCards, renderDenied, renderLogin, renderStalePrompt,
         renderUtilization } from "./render.js";
import { navigationFor, routeFor, type Session } from "./session.js";
import type { AssignmentResponse, BookingRow, ClustersResponse,
              InstanceView, Role, UtilizationReport,
              WorkflowDefinition } from "./types.js";
import { buildUtilizationView } from "./utilization.js";
import { advanceAction, nextActionButton } from "./workflow.js";

interface AppState {
  session: Session | null;
  definition: WorkflowDefinition | null;
}

export class DashboardApp {
  private client: ApiClient;
  private state: AppState = { session: null, definition: null };

  constructor(baseUrl: string, private root: HTMLElement,
              private now: () => number = () => Date.now() / 1000) {
    this.client = createClient(baseUrl, () => this.state.session?.token ?? null);
  }

  async login(token: string, userId: string, roles: Role[],
              expiresAt: number): Promise<void> {
    this.state.session = { token, userId, roles, expiresAt };
    await this.navigate();
  }

  setDefinition(definition: WorkflowDefinition): void {
    this.state.definition = definition;
  }

  async navigate(): Promise<void> {
    const route = routeFor(this.state.session, this.now());
    if (route === "#/login") {
      this.root.innerHTML = renderLogin();
      return;
    }
    const session = this.state.session!;
    const sections = navigationFor(session);
    const nav = sections.map((s) => `<a href="#/${s}">${s}</a>`).join(" | ");
    this.root.innerHTML = `<nav>${nav}</nav><main id="view"></main>`;
    await this.showSection(sections[0]);
  }

  private view(): HTMLElement {
    return this.root.querySelector("#view") as HTMLElement;
  }

  async showSection(section: string): Promise<void> {
    if (section === "bookings" || section === "confirmations") {
      const data = await this.client.get<{ bookings: BookingRow[] }>("/bookings");
      this.view().innerHTML = renderBookingList(data.bookings);
    } else if (section === "clusters") {
      await this.showClusters(new Date().toISOString().slice(0, 10));
    } else if (section === "utilization") {
      this.view().innerHTML = `<p class="empty">Pick a tractor to inspect.</p>`;
    }
  }

  async showClusters(date: string): Promise<void> {
    const clusters = await this.client.get<ClustersResponse>(
      `/clusters?date=${date}`);
    let assignment: AssignmentResponse | undefined;
    try {
      assignment = await this.client.post<AssignmentResponse>(
        "/plans/assign", { date });
    } catch {
      assignment = undefined;
    }
    this.view().innerHTML = renderClusterCards(
      buildClusterView(date, clusters, assignment));
  }

  async showInstance(instanceId: string): Promise<void> {
    const session = this.state.session!;
    let instance: InstanceView;
    try {
      instance = await this.client.get<InstanceView>(`/instances/${instanceId}`);
    } catch (error) {
      if (error instanceof GatewayError && error.status === 403) {
        this.view().innerHTML = renderDenied(error.message);
        return;
      }
      throw error;
    }
    const button = this.state.definition
      ? nextActionButton(this.state.definition, instance, session)
      : null;
    this.view().innerHTML =
      renderAuditTrail(instance) + renderActionButton(button);
  }

  async clickAction(instanceId: string, action: string,
                    payload: Record<string, unknown>): Promise<void> {
    const outcome = await advanceAction(this.client, instanceId, action, payload);
    if (outcome.kind === "ready") {
      this.view().innerHTML = renderAuditTrail(outcome.instance);
    } else if (outcome.kind === "stale") {
      this.view().innerHTML = renderStalePrompt(outcome.prompt);
    } else if (outcome.kind === "denied") {
      this.view().innerHTML = renderDenied(outcome.explanation);
    }
  }

  async showUtilization(tractorId: string, from: string, to: string
                        ): Promise<void> {
    const session = this.state.session!;
    try {
      const report = await this.client.get<UtilizationReport>(
        `/tractors/${tractorId}/utilization?from=${from}&to=${to}`);
      const state = buildUtilizationView(session, report);
      this.view().innerHTML = state.kind === "charts"
        ? renderUtilization(state.charts)
        : renderDenied(state.explanation);
    } catch (error) {
      if (error instanceof GatewayError && error.status === 403) {
        this.view().innerHTML = renderDenied(error.message);
        return;
      }
      throw error;
    }
  }
}
