// Service worker: pre-cache the shell on install, evict stale cache versions
// on activate, serve shell requests cache-first so the app chrome renders
// with no network. API traffic always goes to the network untouched.

import { CACHE_VERSION, SHELL_PATHS, cacheFirst, cachesToEvict, isShellRequest } from "./sw-logic.js";

declare const self: ServiceWorkerGlobalScope;

self.addEventListener("install", (event: ExtendableEvent) => {
  event.waitUntil(
    caches
      .open(CACHE_VERSION)
      .then((cache) => cache.addAll(SHELL_PATHS))
      .then(() => self.skipWaiting()),
  );
});

self.addEventListener("activate", (event: ExtendableEvent) => {
  event.waitUntil(
    caches
      .keys()
      .then((keys) => Promise.all(cachesToEvict(keys).map((stale) => caches.delete(stale))))
      .then(() => self.clients.claim()),
  );
});

self.addEventListener("fetch", (event: FetchEvent) => {
  if (!isShellRequest(event.request.method, event.request.url, self.location.origin)) {
    return; // API calls hit the network directly
  }
  event.respondWith(
    caches.open(CACHE_VERSION).then((cache) => cacheFirst(cache, event.request, (request) => fetch(request))),
  );
});
