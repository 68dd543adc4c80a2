// Single transport for every query/mutation: POST to /graphql, bearer header
// when a session exists, and errors folded into three categories the UI
// reacts to. An auth-category failure wipes the session via the injected
// callback so the router falls back to the login screen.

import type { Session } from "./session.js";

export type GqlErrorCategory = "auth" | "validation" | "network";

export class GqlError extends Error {
  readonly category: GqlErrorCategory;
  readonly code: string | undefined;
  readonly violations: Array<{ field: string; reason: string }>;

  constructor(
    category: GqlErrorCategory,
    message: string,
    code?: string,
    violations?: Array<{ field: string; reason: string }>,
  ) {
    super(message);
    this.category = category;
    this.code = code;
    this.violations = violations ?? [];
  }
}

export interface GqlConfig {
  endpoint: string;
  fetchFn: typeof fetch;
  onAuthError: () => void;
}

const config: GqlConfig = {
  endpoint: "/graphql",
  fetchFn: (...args) => fetch(...args),
  onAuthError: () => {},
};

export function configureGql(overrides: Partial<GqlConfig>): void {
  Object.assign(config, overrides);
}

interface GqlResponseError {
  message: string;
  extensions?: { code?: string; violations?: Array<{ field: string; reason: string }> };
}

const AUTH_CODES = new Set(["UNAUTHENTICATED", "FORBIDDEN"]);

export async function gql<T = Record<string, unknown>>(
  query: string,
  variables: Record<string, unknown> = {},
  session: Session | null = null,
): Promise<T> {
  const headers: Record<string, string> = { "Content-Type": "application/json" };
  if (session) headers["Authorization"] = `Bearer ${session.jwt}`;
  let response: Response;
  try {
    response = await config.fetchFn(config.endpoint, {
      method: "POST",
      headers,
      body: JSON.stringify({ query, variables }),
    });
  } catch (cause) {
    throw new GqlError("network", `server unreachable: ${String(cause)}`);
  }
  if (!response.ok) {
    throw new GqlError("network", `transport failure: HTTP ${response.status}`);
  }
  let body: { data?: T; errors?: GqlResponseError[] };
  try {
    body = await response.json();
  } catch {
    throw new GqlError("network", "response was not JSON");
  }
  const errors = body.errors ?? [];
  if (errors.length > 0) {
    const first = errors[0];
    const code = first.extensions?.code;
    if (code !== undefined && AUTH_CODES.has(code)) {
      config.onAuthError();
      throw new GqlError("auth", first.message, code);
    }
    throw new GqlError("validation", first.message, code, first.extensions?.violations);
  }
  if (body.data === undefined) {
    throw new GqlError("network", "response held neither data nor errors");
  }
  return body.data;
}
