// Session lifecycle: one JSON blob in local storage under a fixed key.
// Present iff login completed; cleared on logout or any auth-class failure.
export const SESSION_KEY = "idvault.session";
class MemoryStorage {
    constructor() {
        this.map = new Map();
    }
    getItem(key) {
        return this.map.has(key) ? this.map.get(key) : null;
    }
    setItem(key, value) {
        this.map.set(key, value);
    }
    removeItem(key) {
        this.map.delete(key);
    }
    keys() {
        return [...this.map.keys()];
    }
    values() {
        return [...this.map.values()];
    }
}
let storage = typeof globalThis.localStorage !== "undefined" ? globalThis.localStorage : new MemoryStorage();
/** Swap the backing store (tests run without a browser). */
export function setStorage(backend) {
    storage = backend;
}
export function createMemoryStorage() {
    return new MemoryStorage();
}
export function saveSession(session) {
    storage.setItem(SESSION_KEY, JSON.stringify(session));
}
export function loadSession() {
    const raw = storage.getItem(SESSION_KEY);
    if (raw === null)
        return null;
    try {
        const parsed = JSON.parse(raw);
        if (typeof parsed.jwt !== "string" || parsed.jwt.length === 0)
            return null;
        return parsed;
    }
    catch {
        storage.removeItem(SESSION_KEY);
        return null;
    }
}
export function clearSession() {
    storage.removeItem(SESSION_KEY);
}
