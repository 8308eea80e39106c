export interface FormHandlers {
  onTrigger(logicalDate: string): Promise<void>;
  onBackfill(body: {
    from: string;
    to: string;
    parallelism: number;
    from_silver: boolean;
  }): Promise<void>;
}

const ISO_DAY = /^\d{4}-\d{2}-\d{2}$/;

function field(labelText: string, input: HTMLElement): HTMLLabelElement {
  const label = document.createElement("label");
  const span = document.createElement("span");
  span.textContent = labelText;
  label.append(span, input);
  return label;
}

function textInput(name: string, placeholder: string): HTMLInputElement {
  const input = document.createElement("input");
  input.type = "text";
  input.name = name;
  input.placeholder = placeholder;
  return input;
}

/**
 * Trigger and backfill forms. Validation that can be decided client-side
 * (date format, inverted range, parallelism bounds) is reported inline
 * without a request; anything else defers to the API, whose 400s land in
 * the same inline slot.
 */
export function renderForms(container: HTMLElement, handlers: FormHandlers): void {
  container.textContent = "";

  const triggerForm = document.createElement("form");
  triggerForm.dataset.testid = "trigger-form";
  const triggerDate = textInput("logical_date", "2024-03-01");
  const triggerError = document.createElement("p");
  triggerError.className = "form-error";
  const triggerButton = document.createElement("button");
  triggerButton.type = "submit";
  triggerButton.textContent = "trigger run";
  triggerForm.append(field("logical date", triggerDate), triggerButton, triggerError);
  triggerForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    triggerError.textContent = "";
    const day = triggerDate.value.trim();
    if (!ISO_DAY.test(day)) {
      triggerError.textContent = "logical date must be YYYY-MM-DD";
      return;
    }
    void handlers.onTrigger(day).catch((err) => {
      triggerError.textContent = String((err as Error).message);
    });
  });

  const backfillForm = document.createElement("form");
  backfillForm.dataset.testid = "backfill-form";
  const fromInput = textInput("from", "2024-03-01");
  const toInput = textInput("to", "2024-03-30");
  const parallelismInput = textInput("parallelism", "4");
  parallelismInput.value = "4";
  const fromSilver = document.createElement("input");
  fromSilver.type = "checkbox";
  fromSilver.name = "from_silver";
  fromSilver.checked = true;
  const backfillError = document.createElement("p");
  backfillError.className = "form-error";
  const backfillButton = document.createElement("button");
  backfillButton.type = "submit";
  backfillButton.textContent = "backfill range";
  backfillForm.append(
    field("from", fromInput),
    field("to", toInput),
    field("parallelism", parallelismInput),
    field("reuse silver", fromSilver),
    backfillButton,
    backfillError,
  );
  backfillForm.addEventListener("submit", (ev) => {
    ev.preventDefault();
    backfillError.textContent = "";
    const from = fromInput.value.trim();
    const to = toInput.value.trim();
    if (!ISO_DAY.test(from) || !ISO_DAY.test(to)) {
      backfillError.textContent = "dates must be YYYY-MM-DD";
      return;
    }
    if (to < from) {
      backfillError.textContent = "range is inverted: 'to' is before 'from'";
      return;
    }
    const parallelism = Number(parallelismInput.value);
    if (!Number.isInteger(parallelism) || parallelism < 1) {
      backfillError.textContent = "parallelism must be a positive integer";
      return;
    }
    void handlers
      .onBackfill({ from, to, parallelism, from_silver: fromSilver.checked })
      .catch((err) => {
        backfillError.textContent = String((err as Error).message);
      });
  });

  container.append(triggerForm, backfillForm);
}
