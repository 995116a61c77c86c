import { ReviewClient } from "./api";
import { ReviewApp } from "./app";
import "./styles.css";

function serviceUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("service");
  if (fromQuery) {
    localStorage.setItem("service-url", fromQuery);
    return fromQuery;
  }
  return localStorage.getItem("service-url") ?? "http://127.0.0.1:8400";
}

function reviewerId(): string {
  // the one piece of state that survives a refresh
  let id = localStorage.getItem("reviewer-id");
  if (!id) {
    id = window.prompt("Reviewer id:")?.trim() || `reviewer-${Date.now()}`;
    localStorage.setItem("reviewer-id", id);
  }
  return id;
}

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
const app = new ReviewApp(root, new ReviewClient(serviceUrl()), reviewerId());
void app.start();
