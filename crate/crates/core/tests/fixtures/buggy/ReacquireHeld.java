package org.example.sip;

import android.os.PowerManager;

public class ReacquireHeld {
    private PowerManager pm;

    void register(boolean keepAwake) {
        PowerManager.WakeLock lock = pm.newWakeLock(PowerManager.PARTIAL_WAKE_LOCK, "sip");
        lock.acquire();
        if (keepAwake) {
            lock.acquire(); // LEAK: reacquire_counted
        }
        sendRegistration();
        lock.release();
    }
}
