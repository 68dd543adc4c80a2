// Pure decisions behind the service worker, kept import-safe for tests:
// what counts as app shell, which caches are stale, and the cache-first
// fetch strategy that keeps the shell rendering offline.

export const CACHE_VERSION = "idvault-shell-v2";

export const SHELL_PATHS = [
  "/",
  "/index.html",
  "/styles.css",
  "/manifest.webmanifest",
  "/js/app.js",
  "/js/api.js",
  "/js/gql.js",
  "/js/router.js",
  "/js/session.js",
  "/js/screens.js",
  "/icons/icon-192.png",
  "/icons/icon-512.png",
];

const API_PREFIXES = ["/graphql", "/upload", "/media/", "/healthz"];

/** Shell requests are same-origin GETs that are not API traffic; only these
 * are served cache-first. */
export function isShellRequest(method: string, url: string, origin: string): boolean {
  if (method !== "GET") return false;
  let parsed: URL;
  try {
    parsed = new URL(url, origin);
  } catch {
    return false;
  }
  if (parsed.origin !== origin) return false;
  return !API_PREFIXES.some((prefix) => parsed.pathname === prefix || parsed.pathname.startsWith(prefix));
}

export function cachesToEvict(existing: string[]): string[] {
  return existing.filter((name) => name !== CACHE_VERSION);
}

export interface CacheLike {
  match(request: Request | string): Promise<Response | undefined>;
  put(request: Request | string, response: Response): Promise<void>;
}

/** Serve from cache, fall back to the network (caching a copy), and when
 * both miss offline navigation falls back to the cached shell entry. */
export async function cacheFirst(
  cache: CacheLike,
  request: Request,
  network: (request: Request) => Promise<Response>,
): Promise<Response> {
  const cached = await cache.match(request);
  if (cached) return cached;
  let response: Response;
  try {
    response = await network(request);
  } catch {
    const shell = await cache.match("/index.html");
    if (shell) return shell;
    return new Response("offline", { status: 503, statusText: "offline" });
  }
  if (response.ok) {
    await cache.put(request, response.clone());
  }
  return response;
}
