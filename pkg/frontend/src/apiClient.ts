// Thin fetch wrapper for the gateway: bearer auth, JSON bodies, and a
// typed error channel so views can distinguish denial from staleness.

import type { ApiError } from "./types.js";

export class GatewayError extends Error {
  status: number;
  code: string;

  constructor(status: number, payload: ApiError) {
    super(payload.message || payload.code);
    this.status = status;
    this.code = payload.code;
  }
}

export interface ApiClient {
  get<T>(path: string): Promise<T>;
  post<T>(path: string, body: unknown): Promise<T>;
}

export function createClient(baseUrl: string, token: () => string | null): ApiClient {
  async function request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    const bearer = token();
    if (bearer) headers["Authorization"] = `Bearer ${bearer}`;
    const response = await fetch(baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : {};
    if (!response.ok) {
      throw new GatewayError(response.status, payload as ApiError);
    }
    return payload as T;
  }

  return {
    get: <T>(path: string) => request<T>("GET", path),
    post: <T>(path: string, body: unknown) => request<T>("POST", path, body),
  };
}
