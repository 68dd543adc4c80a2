// Session lifecycle: one JSON blob in local storage under a fixed key.
// Present iff login completed; cleared on logout or any auth-class failure.

export interface Session {
  jwt: string;
  username: string;
  email: string;
  obtainedAt: string;
}

export const SESSION_KEY = "idvault.session";

export interface KVStorage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

class MemoryStorage implements KVStorage {
  private map = new Map<string, string>();
  getItem(key: string): string | null {
    return this.map.has(key) ? this.map.get(key)! : null;
  }
  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }
  removeItem(key: string): void {
    this.map.delete(key);
  }
  keys(): string[] {
    return [...this.map.keys()];
  }
  values(): string[] {
    return [...this.map.values()];
  }
}

let storage: KVStorage =
  typeof globalThis.localStorage !== "undefined" ? globalThis.localStorage : new MemoryStorage();

/** Swap the backing store (tests run without a browser). */
export function setStorage(backend: KVStorage): void {
  storage = backend;
}

export function createMemoryStorage(): MemoryStorage {
  return new MemoryStorage();
}

export function saveSession(session: Session): void {
  storage.setItem(SESSION_KEY, JSON.stringify(session));
}

export function loadSession(): Session | null {
  const raw = storage.getItem(SESSION_KEY);
  if (raw === null) return null;
  try {
    const parsed = JSON.parse(raw) as Session;
    if (typeof parsed.jwt !== "string" || parsed.jwt.length === 0) return null;
    return parsed;
  } catch {
    storage.removeItem(SESSION_KEY);
    return null;
  }
}

export function clearSession(): void {
  storage.removeItem(SESSION_KEY);
}
