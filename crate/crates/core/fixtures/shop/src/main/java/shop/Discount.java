package shop;

public interface Discount {
    Money apply(Money amount);
}

class PercentOff implements Discount {
    private final int percent;

    PercentOff(int percent) {
        this.percent = percent;
    }

    public Money apply(Money amount) {
        return Money.of(amount.cents() * (100 - percent) / 100);
    }
}
