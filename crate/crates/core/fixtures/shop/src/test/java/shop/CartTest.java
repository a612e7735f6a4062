package shop;

import static org.junit.jupiter.api.Assertions.assertEquals;
import static org.junit.jupiter.api.Assertions.assertTrue;

import org.junit.jupiter.api.Test;

class CartTest {
    @Test
    void total_sumsSubtotals() {
        Cart cart = new Cart();
        cart.add(new Item("pen", Money.of(120), 2));
        cart.add(new Item("pad", Money.of(80)));
        assertEquals(320, cart.total().cents());
    }

    @Test
    void size_countsItems() {
        Cart cart = new Cart();
        cart.add(new Item("pen", Money.of(120)));
        assertEquals(1, cart.size());
    }

    @Test
    void clear_emptiesCart() {
        Cart cart = new Cart();
        cart.add(new Item("pen", Money.of(120)));
        cart.clear();
        assertTrue(cart.total().isZero());
    }

    @Test
    void applyDiscount_reducesTotal() {
        Cart cart = new Cart();
        cart.add(new Item("pen", Money.of(1000)));
        cart.applyDiscount(new PercentOff(25));
        assertEquals(750, cart.total().cents());
    }
}
