// Cluster view: the recorded three-farm service cluster renders as one
// card with three polygons, and GeoJSON coordinates survive untouched.

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { createClient } from "../src/apiClient.js";
import { buildClusterView } from "../src/clusters.js";
import { renderClusterCards } from "../src/render.js";
import type { AssignmentResponse, ClustersResponse } from "../src/types.js";
import { loadCorpus, startFixtureServer, type FixtureServer } from "../server/fixtureServer.js";

let server: FixtureServer;
const corpus = loadCorpus();

beforeAll(async () => {
  server = await startFixtureServer();
});

afterAll(async () => {
  await server.close();
});

function clientFor(role: string) {
  return createClient(server.url, () => `fixture-token-${role}`);
}

describe("cluster view", () => {
  it("renders the three-farm cluster as one card with three polygons", async () => {
    const client = clientFor("fleet_manager");
    const clusters = await client.get<ClustersResponse>(
      `/clusters?date=${corpus.trio_date}`);
    const assignment = await client.post<AssignmentResponse>(
      "/plans/assign", { date: corpus.trio_date });
    const view = buildClusterView(corpus.trio_date, clusters, assignment);
    expect(view.cards).toHaveLength(1);
    const card = view.cards[0];
    expect(card.farmIds).toHaveLength(3);
    expect(card.polygons).toHaveLength(3);
    expect(card.tractorId).toBeTruthy();
    expect(card.operatorId).toBeTruthy();
    const html = renderClusterCards(view);
    expect(html.match(/<polygon/g)).toHaveLength(3);
    expect(html).toContain("cluster-card");
    expect(html).toContain(card.tractorId!);
  });

  it("round-trips GeoJSON coordinates without mutation", async () => {
    const client = clientFor("fleet_manager");
    const clusters = await client.get<ClustersResponse>(
      `/clusters?date=${corpus.trio_date}`);
    const original = JSON.parse(JSON.stringify(clusters));
    const view = buildClusterView(corpus.trio_date, clusters);
    for (const [c, cluster] of clusters.clusters.entries()) {
      for (const [m, member] of cluster.members.entries()) {
        if (member.boundary === null) continue;
        const rendered = view.cards[c].polygons[m].ring;
        expect(rendered).toEqual(
          original.clusters[c].members[m].boundary.geometry.coordinates[0]);
      }
    }
    // and the source response object itself is untouched
    expect(clusters).toEqual(original);
  });

  it("shows an empty state for a date with no clusters", async () => {
    const client = clientFor("fleet_manager");
    const clusters = await client.get<ClustersResponse>(
      "/clusters?date=2031-01-01");
    const view = buildClusterView("2031-01-01", clusters);
    expect(view.empty).toBe(true);
    expect(renderClusterCards(view)).toContain("No clusters");
  });

  it("denies the operator role at the gateway and surfaces it", async () => {
    const client = clientFor("operator");
    await expect(client.get(`/clusters?date=${corpus.trio_date}`))
      .rejects.toMatchObject({ status: 403 });
  });
});
