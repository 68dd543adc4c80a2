// Entry point: wires the transport to session handling, guards routes, keeps
// the offline banner honest, and registers the service worker.
import { configureGql } from "./gql.js";
import { Router } from "./router.js";
import { renderDashboard, renderLogin, renderRegister, renderUpload } from "./screens.js";
import { clearSession, loadSession } from "./session.js";
function offlineBanner() {
    const banner = document.createElement("div");
    banner.className = "offline-banner";
    banner.textContent = "Offline — showing the cached shell; data will load when the connection returns.";
    banner.hidden = navigator.onLine;
    window.addEventListener("online", () => {
        banner.hidden = true;
    });
    window.addEventListener("offline", () => {
        banner.hidden = false;
    });
    return banner;
}
function main() {
    const root = document.getElementById("app");
    if (!root)
        throw new Error("missing #app mount point");
    const outlet = document.createElement("main");
    outlet.className = "outlet";
    root.replaceChildren(offlineBanner(), outlet);
    const router = new Router(() => loadSession() !== null, (route) => {
        if (route === "login")
            renderLogin(outlet, router);
        else if (route === "register")
            renderRegister(outlet, router);
        else if (route === "dashboard")
            renderDashboard(outlet, router);
        else
            renderUpload(outlet, router);
    });
    configureGql({
        onAuthError: () => {
            clearSession();
            router.go("login");
        },
    });
    router.start();
    if ("serviceWorker" in navigator) {
        // progressive enhancement: without SW support the app is online-only
        navigator.serviceWorker.register("/sw.js", { type: "module" }).catch(() => { });
    }
}
main();
