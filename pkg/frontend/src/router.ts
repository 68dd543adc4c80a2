// Hash routing with a session guard: the dashboard and upload screens are
// unreachable without a session, and login/register are unreachable with one.

export type Route = "login" | "register" | "dashboard" | "upload";

export const ROUTES: Route[] = ["login", "register", "dashboard", "upload"];

export function routeFromHash(hash: string): Route | null {
  const name = hash.replace(/^#\/?/, "");
  return (ROUTES as string[]).includes(name) ? (name as Route) : null;
}

export function guardRoute(requested: Route | null, hasSession: boolean): Route {
  if (!hasSession) {
    return requested === "register" ? "register" : "login";
  }
  if (requested === null || requested === "login" || requested === "register") {
    return "dashboard";
  }
  return requested;
}

export type RenderFn = (route: Route) => void;

export class Router {
  private onLeave: (() => void) | null = null;

  constructor(
    private readonly hasSession: () => boolean,
    private readonly render: RenderFn,
  ) {}

  current(): Route {
    const hash = typeof location !== "undefined" ? location.hash : "";
    return guardRoute(routeFromHash(hash), this.hasSession());
  }

  /** Register cleanup to run when the route changes (poll timers etc.). */
  beforeLeave(cleanup: () => void): void {
    this.onLeave = cleanup;
  }

  go(route: Route): void {
    const target = guardRoute(route, this.hasSession());
    if (typeof location !== "undefined") {
      if (location.hash !== `#/${target}`) {
        location.hash = `#/${target}`;
        return; // hashchange listener re-renders
      }
    }
    this.apply(target);
  }

  apply(route: Route): void {
    if (this.onLeave) {
      this.onLeave();
      this.onLeave = null;
    }
    this.render(guardRoute(route, this.hasSession()));
  }

  start(): void {
    if (typeof window !== "undefined") {
      window.addEventListener("hashchange", () => this.apply(this.current()));
    }
    this.apply(this.current());
  }
}
