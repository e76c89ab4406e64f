// Session routing: roles drive navigation; expired sessions go to login.

import { describe, expect, it } from "vitest";

import { navigationFor, routeFor, sessionExpired, type Session } from "../src/session.js";

function session(roles: string[], expiresAt = 2000): Session {
  return { token: "t", userId: "u", roles: roles as Session["roles"], expiresAt };
}

describe("session routing", () => {
  it("agent lands on bookings", () => {
    expect(routeFor(session(["agent"]), 1000)).toBe("#/bookings");
  });

  it("fleet manager lands on clusters", () => {
    expect(routeFor(session(["fleet_manager"]), 1000)).toBe("#/clusters");
  });

  it("supervisor lands on confirmations, financier on utilization", () => {
    expect(routeFor(session(["supervisor"]), 1000)).toBe("#/confirmations");
    expect(routeFor(session(["financier"]), 1000)).toBe("#/utilization");
  });

  it("expired session redirects to login", () => {
    const s = session(["agent"], 1500);
    expect(sessionExpired(s, 1501)).toBe(true);
    expect(routeFor(s, 1501)).toBe("#/login");
    expect(routeFor(null, 0)).toBe("#/login");
  });

  it("admin sees every section", () => {
    expect(navigationFor(session(["admin"]))).toEqual(
      ["bookings", "clusters", "confirmations", "utilization"]);
  });
});
