// HTML/SVG string renderers.  Pure functions of view models so that both
// the browser shell and the tests consume identical markup.

import type { ClusterCard, ClusterViewModel } from "./clusters.js";
import type { UtilizationCharts } from "./utilization.js";
import type { ActionButton } from "./workflow.js";
import type { BookingRow, InstanceView } from "./types.js";

const esc = (value: unknown): string =>
  String(value).replace(/[&<>"]/g, (ch) =>
    ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" }[ch] as string));

export function renderBookingList(rows: BookingRow[]): string {
  if (!rows.length) {
    return `<p class="empty">No bookings yet.</p>`;
  }
  const body = rows.map((row) => `
    <tr data-instance="${esc(row.instance_id)}">
      <td>${esc(row.booking_id)}</td>
      <td>${esc(row.farm_id)}</td>
      <td>${esc(row.service_type ?? "-")}</td>
      <td>${esc(row.scheduled_date ?? "-")}</td>
      <td class="status">${esc(row.status)}</td>
      <td>${row.flags.map((f) => `<span class="flag">${esc(f)}</span>`).join("")}</td>
    </tr>`).join("");
  return `<table class="bookings"><thead>
    <tr><th>booking</th><th>farm</th><th>service</th><th>date</th>
    <th>status</th><th>flags</th></tr></thead><tbody>${body}</tbody></table>`;
}

export function renderActionButton(button: ActionButton | null): string {
  if (button === null) {
    return `<p class="no-action">No further action on this booking.</p>`;
  }
  if (!button.enabled) {
    return `<button class="action" disabled
      title="${esc(button.reason)}">${esc(button.action)}</button>
      <p class="why-disabled">${esc(button.reason)}</p>`;
  }
  return `<button class="action" data-action="${esc(button.action)}">
    ${esc(button.action)}</button>`;
}

export function renderAuditTrail(instance: InstanceView): string {
  const trail = instance.audit_trail ?? instance.history ?? [];
  const rows = trail.map((record) => `
    <tr><td>${esc(record.action_name)}</td><td>${esc(record.actor_role)}</td>
    <td class="tx">${esc(record.tx_id.slice(0, 16))}&hellip;</td></tr>`).join("");
  return `<table class="audit"><thead>
    <tr><th>action</th><th>role</th><th>tx</th></tr></thead>
    <tbody>${rows}</tbody></table>`;
}

export function renderStalePrompt(prompt: string): string {
  return `<div class="stale-view">
    <p>${esc(prompt)}</p>
    <button class="refresh" data-refresh>Refresh</button>
  </div>`;
}

export function renderClusterMap(card: ClusterCard): string {
  const polygons = card.polygons.map((polygon) => `
    <polygon points="${polygon.svgPoints}" class="farm"
      data-farm="${esc(polygon.farmId)}">
      <title>${esc(polygon.farmId)} (${polygon.areaHa.toFixed(2)} ha)</title>
    </polygon>`).join("");
  return `<svg viewBox="0 0 640 480" class="cluster-map">${polygons}</svg>`;
}

export function renderClusterCards(view: ClusterViewModel): string {
  if (view.empty) {
    return `<p class="empty">No clusters scheduled for ${esc(view.date)}.</p>`;
  }
  return view.cards.map((card) => `
    <section class="cluster-card" data-cluster="${esc(card.clusterId)}">
      <h3>${esc(card.clusterId)} &mdash; ${esc(card.skill)}
        (${card.totalHa.toFixed(2)} ha)</h3>
      <p class="pair">${card.tractorId
        ? `tractor ${esc(card.tractorId)} / operator ${esc(card.operatorId)}`
        : "unassigned"}</p>
      <ul>${card.farmIds.map((f) => `<li>${esc(f)}</li>`).join("")}</ul>
      ${renderClusterMap(card)}
    </section>`).join("");
}

export function renderUtilization(charts: UtilizationCharts): string {
  const max = Math.max(...charts.bars.map((bar) => bar.value), 1);
  const bars = charts.bars.map((bar) => `
    <div class="bar-row">
      <span class="bar-label">${esc(bar.label)}</span>
      <div class="bar" style="width:${(100 * bar.value / max).toFixed(1)}%"></div>
      <span class="bar-value">${bar.value.toFixed(
        Number.isInteger(bar.value) ? 0 : 2)}</span>
    </div>`).join("");
  return `<section class="utilization" data-tractor="${esc(charts.tractorId)}">
    <h3>Tractor ${esc(charts.tractorId)} &mdash; ${esc(charts.period)}</h3>
    ${charts.empty ? `<p class="empty">No activity in this period.</p>` : ""}
    <div class="bars">${bars}</div>
  </section>`;
}

export function renderDenied(explanation: string): string {
  return `<div class="denied"><p>${esc(explanation)}</p></div>`;
}

export function renderLogin(): string {
  return `<form class="login">
    <label>User id <input name="user_id"></label>
    <label>Enrollment secret <input name="enrollment_secret" type="password"></label>
    <button type="submit">Sign in</button>
  </form>`;
}
