// Transient, non-blocking notices stacked in a fixed corner container.

export type ToastTone = "info" | "error";

export type Toaster = (text: string, tone: ToastTone) => void;

export function createToaster(container: HTMLElement, lifetimeMs = 2600): Toaster {
  return (text, tone) => {
    const node = document.createElement("div");
    node.className = `toast toast-${tone}`;
    node.setAttribute("role", "status");
    node.textContent = text;
    container.appendChild(node);
    setTimeout(() => node.remove(), lifetimeMs);
  };
}
