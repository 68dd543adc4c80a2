// Hash routing with a session guard: the dashboard and upload screens are
// unreachable without a session, and login/register are unreachable with one.
export const ROUTES = ["login", "register", "dashboard", "upload"];
export function routeFromHash(hash) {
    const name = hash.replace(/^#\/?/, "");
    return ROUTES.includes(name) ? name : null;
}
export function guardRoute(requested, hasSession) {
    if (!hasSession) {
        return requested === "register" ? "register" : "login";
    }
    if (requested === null || requested === "login" || requested === "register") {
        return "dashboard";
    }
    return requested;
}
export class Router {
    constructor(hasSession, render) {
        this.hasSession = hasSession;
        this.render = render;
        this.onLeave = null;
    }
    current() {
        const hash = typeof location !== "undefined" ? location.hash : "";
        return guardRoute(routeFromHash(hash), this.hasSession());
    }
    /** Register cleanup to run when the route changes (poll timers etc.). */
    beforeLeave(cleanup) {
        this.onLeave = cleanup;
    }
    go(route) {
        const target = guardRoute(route, this.hasSession());
        if (typeof location !== "undefined") {
            if (location.hash !== `#/${target}`) {
                location.hash = `#/${target}`;
                return; // hashchange listener re-renders
            }
        }
        this.apply(target);
    }
    apply(route) {
        if (this.onLeave) {
            this.onLeave();
            this.onLeave = null;
        }
        this.render(guardRoute(route, this.hasSession()));
    }
    start() {
        if (typeof window !== "undefined") {
            window.addEventListener("hashchange", () => this.apply(this.current()));
        }
        this.apply(this.current());
    }
}
