// Session state: who is logged in, which navigation they get, and when
// they bounce back to the login view.

import type { Role } from "./types.js";

export interface Session {
  token: string;
  userId: string;
  roles: Role[];
  expiresAt: number; // epoch seconds
}

export type NavSection = "bookings" | "clusters" | "confirmations" | "utilization";

// Roles drive navigation: agents live in bookings, fleet managers in
// clusters/assignments, supervisors in confirmations, financiers in
// utilization.  Admin sees everything.
const NAVIGATION: Record<Role, NavSection[]> = {
  agent: ["bookings"],
  farmer: ["bookings"],
  fleet_manager: ["clusters", "bookings", "utilization"],
  operator: ["bookings"],
  supervisor: ["confirmations", "bookings"],
  financier: ["utilization", "bookings"],
  admin: ["bookings", "clusters", "confirmations", "utilization"],
};

export function navigationFor(session: Session): NavSection[] {
  const sections: NavSection[] = [];
  for (const role of session.roles) {
    for (const section of NAVIGATION[role] ?? []) {
      if (!sections.includes(section)) sections.push(section);
    }
  }
  return sections;
}

export function sessionExpired(session: Session, nowSeconds: number): boolean {
  return nowSeconds > session.expiresAt;
}

/** Where the router should send the user; expired sessions go to login. */
export function routeFor(session: Session | null, nowSeconds: number): string {
  if (session === null || sessionExpired(session, nowSeconds)) {
    return "#/login";
  }
  const sections = navigationFor(session);
  return sections.length ? `#/${sections[0]}` : "#/login";
}
