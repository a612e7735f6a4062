package shop;

public final class Money {
    public static final Money ZERO = new Money(0);

    private final long cents;

    public Money(long cents) {
        if (cents < 0) {
            throw new IllegalArgumentException("negative amount");
        }
        this.cents = cents;
    }

    public static Money of(long cents) {
        return cents == 0 ? ZERO : new Money(cents);
    }

    public Money plus(Money other) {
        return new Money(cents + other.cents);
    }

    public Money times(int factor) {
        return new Money(cents * factor);
    }

    public boolean isZero() {
        return cents == 0;
    }

    public long cents() {
        return cents;
    }
}
