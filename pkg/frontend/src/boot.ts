import { createApp } from "./main";

const root = document.getElementById("app");
if (root !== null) {
  void createApp(root).init();
}
