// Single transport for every query/mutation: POST to /graphql, bearer header
// when a session exists, and errors folded into three categories the UI
// reacts to. An auth-category failure wipes the session via the injected
// callback so the router falls back to the login screen.
export class GqlError extends Error {
    constructor(category, message, code, violations) {
        super(message);
        this.category = category;
        this.code = code;
        this.violations = violations ?? [];
    }
}
const config = {
    endpoint: "/graphql",
    fetchFn: (...args) => fetch(...args),
    onAuthError: () => { },
};
export function configureGql(overrides) {
    Object.assign(config, overrides);
}
const AUTH_CODES = new Set(["UNAUTHENTICATED", "FORBIDDEN"]);
export async function gql(query, variables = {}, session = null) {
    const headers = { "Content-Type": "application/json" };
    if (session)
        headers["Authorization"] = `Bearer ${session.jwt}`;
    let response;
    try {
        response = await config.fetchFn(config.endpoint, {
            method: "POST",
            headers,
            body: JSON.stringify({ query, variables }),
        });
    }
    catch (cause) {
        throw new GqlError("network", `server unreachable: ${String(cause)}`);
    }
    if (!response.ok) {
        throw new GqlError("network", `transport failure: HTTP ${response.status}`);
    }
    let body;
    try {
        body = await response.json();
    }
    catch {
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
