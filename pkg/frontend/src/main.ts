/**
 * Page wiring. Configuration comes from URL parameters:
 *   ?api=<service base url>&session=<session id>
 * The api parameter defaults to the page origin.
 */

import { ReviewApi } from "./api.js";
import { ReviewController } from "./controller.js";
import { bindKeys } from "./keyboard.js";
import { ReviewView } from "./view.js";

function start(): void {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app container");
  }
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? window.location.origin;
  const sessionId = params.get("session");
  if (!sessionId) {
    root.textContent = "缺少 session 参数：?api=<服务地址>&session=<会话ID>";
    return;
  }

  const api = new ReviewApi(base);
  const controller = new ReviewController(api, sessionId);
  const view = new ReviewView(root, {
    onAccept: (note) => void controller.submit("accept", note),
    onReject: (note) => void controller.submit("reject", note),
    onRetry: () => void controller.retry(),
  });

  controller.onChange((state) => view.render(state, controller.stats));
  bindKeys(window, {
    accept: () => void controller.submit("accept", view.takeNote()),
    reject: () => void controller.submit("reject", view.takeNote()),
  });

  void controller.loadNext();
}

start();
